import pandas as pd
import plotly.express as px
import plotly.graph_objs as go
import plotly.io as pio

from ._visualization_scheme import BaseVisualizer

DIV_ID = "loss-curves"


class LossVisualizer(BaseVisualizer):
    '''
    Per-epoch loss curves of every training stage in one html page.
    - log: rows of (task, epoch, loss), e.g. the pre-training log plus the fine-tuning history

    usage:
    - LossVisualizer(log, output_folder_path="results/run").loss_curves()
    '''
    div_id = DIV_ID

    def __init__(self, log: pd.DataFrame, output_folder_path="results"):
        pio.templates.default = "simple_white"
        self.colors = px.colors.qualitative.Plotly
        self.data = log.loc[:, ["task", "epoch", "loss"]].sort_values(["task", "epoch"], kind="mergesort")
        super().__init__(output_folder_path=output_folder_path)

    def figure(self) -> go.Figure:
        fig = go.Figure()
        for n, (task, frame) in enumerate(self.data.groupby("task", sort=True)):
            fig.add_trace(go.Scatter(x=frame["epoch"], y=frame["loss"], mode="lines+markers", name=task,
                                     line=dict(color=self.colors[n % len(self.colors)])))
        fig.update_layout(
            title="Training loss",
            xaxis_title="epoch",
            yaxis_title="loss",
            legend_title="stage",
            template="simple_white",
            width=900,
            height=600,
            hovermode="x unified",
        )
        return fig

    def loss_curves(self, file_name: str = "loss_curves.html", return_fig: bool = False):
        path = self.write_page(file_name)
        if return_fig:
            return self.figure()
        return path
