"""Exception hierarchy. Each class maps to one CLI exit code."""


class OscresError(Exception):
    exit_code = 4


class ConfigError(OscresError, ValueError):
    exit_code = 2


class DimensionError(OscresError, ValueError):
    exit_code = 4


class TopologyError(ConfigError):
    pass


class InputError(OscresError, ValueError):
    """Non-finite or out-of-contract drive values."""

    exit_code = 4


class EmbeddingError(ConfigError):
    pass


class DataFormatError(OscresError):
    exit_code = 3


class TrainingError(OscresError):
    pass


class DivergenceError(TrainingError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


class EvaluationError(OscresError):
    pass
