class DecouplerError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigError(DecouplerError, ValueError):
    def __init__(self, messages: list[str] | str):
        if isinstance(messages, str):
            messages = [messages]
        self.messages = list(messages)
        super().__init__('; '.join(self.messages))


class InvalidSequenceError(DecouplerError, ValueError):
    pass


class GridMismatchError(DecouplerError, ValueError):
    pass


class TomographyError(DecouplerError, ValueError):
    pass


class NumericalError(DecouplerError):
    pass


class FitError(NumericalError):
    pass


class NoCrossingError(NumericalError):
    pass


class QuadratureError(NumericalError):
    def __init__(self, message: str, achieved_tolerance: float):
        self.achieved_tolerance = achieved_tolerance
        super().__init__(f'{message} (achieved relative tolerance {achieved_tolerance:.3g})')
