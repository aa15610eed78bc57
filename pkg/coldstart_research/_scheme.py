from typing import Iterable


class ColdStartError(Exception):
    def __init__(self, message: str = ""):
        super().__init__(message)


class DatasetError(ColdStartError):
    pass


class InteractionParseError(DatasetError):
    def __init__(self, line_no: int, line: str, reason: str):
        self.line_no = line_no
        self.line = line
        super().__init__(f"line {line_no}: {reason}: {line!r}")


class EmptyDatasetError(DatasetError):
    pass


class SplitError(ColdStartError):
    pass


class DimensionError(ColdStartError):
    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = shapes
        shown = ", ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {shown}")


class NonFiniteError(ColdStartError):
    def __init__(self, name: str, message: str = "non-finite values"):
        self.name = name
        super().__init__(f"{name}: {message}")


class ParameterError(ColdStartError):
    pass


class SamplingError(ColdStartError):
    pass


class PathError(ColdStartError):
    pass


class AugmentationError(ColdStartError):
    pass


class EncoderError(ColdStartError):
    pass


class MissingGroundTruthError(ColdStartError):
    def __init__(self, nodes: Iterable[int]):
        self.nodes = list(nodes)
        head = ", ".join(str(n) for n in self.nodes[:5])
        super().__init__(f"no ground-truth embedding for node(s) {head}")


class DivergenceError(ColdStartError):
    def __init__(self, task: str, epoch: int, message: str = "loss is not finite"):
        self.task = task
        self.epoch = epoch
        super().__init__(f"{task} diverged at epoch {epoch}: {message}")


class ConfigError(ColdStartError):
    pass


class ArtifactError(ColdStartError):
    pass


class MissingArtifactError(ArtifactError):
    def __init__(self, stage: str, run_first: list):
        self.stage = stage
        self.run_first = list(run_first)
        steps = ", ".join(self.run_first)
        super().__init__(f"missing '{stage}' artifact; run first: {steps}")


class FingerprintMismatchError(ArtifactError):
    def __init__(self, stage: str, expected: str, found: str):
        self.stage = stage
        super().__init__(
            f"'{stage}' artifact was produced by a different configuration "
            f"(expected {expected[:12]}, found {found[:12]}); rerun cmd_{stage}"
        )


class PartialCheckpointError(ArtifactError):
    def __init__(self, failed: list):
        self.failed = list(failed)
        super().__init__(f"checkpoint is partial, diverged task(s): {', '.join(self.failed)}")
