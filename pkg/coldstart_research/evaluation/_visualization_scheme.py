from abc import ABC, abstractmethod
from pathlib import Path
from typing import Optional

import plotly.graph_objs as go

from .._scheme import ArtifactError
from ..autodiff.checkpoint import atomic_write_bytes


class BaseVisualizer(ABC):
    '''
    Self-contained plotly pages. The div id is fixed per visualizer, so the same data
    always renders to the same bytes and a re-emitted report does not change.
    - output_folder_path: folder for write_page(); None keeps pages in memory (to_html only)
    '''
    div_id: str = "figure"

    def __init__(self, output_folder_path: Optional[str] = "results"):
        self.output_folder = Path(output_folder_path) if output_folder_path is not None else None

    @abstractmethod
    def figure(self) -> go.Figure:
        pass

    def to_html(self) -> str:
        return self.figure().to_html(include_plotlyjs=True, div_id=self.div_id, full_html=True)

    def write_page(self, file_name: str) -> Path:
        """temp file plus rename, a reader never sees half a page"""
        if self.output_folder is None:
            raise ArtifactError(f"{type(self).__name__} has no output folder, render with to_html()")
        return atomic_write_bytes(self.output_folder / file_name, self.to_html().encode("utf-8"))
