"""Exception hierarchy shared by the pipeline and mapped to CLI exit codes."""


class MriCnnError(Exception):
    exit_code = 1


class ShapeError(MriCnnError, ValueError):
    exit_code = 2


class ConfigurationError(MriCnnError, ValueError):
    exit_code = 2


class ParameterError(MriCnnError, ValueError):
    exit_code = 2


class ContractError(MriCnnError, ValueError):
    exit_code = 2


class FormatError(MriCnnError):
    """Malformed checkpoint or image file. ``offset`` is the byte position."""

    exit_code = 1

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TrainingError(MriCnnError, ArithmeticError):
    exit_code = 3


class SizeError(ShapeError):
    pass


class DomainError(MriCnnError, ValueError):
    exit_code = 3
