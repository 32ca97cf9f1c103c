"""Exception hierarchy shared by every stage of the pipeline."""


class AdpError(Exception):
    """Base class; ``stage`` names the pipeline step that failed, if known."""

    stage = None

    def __init__(self, message="", stage=None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage

    def __str__(self):
        msg = super().__str__()
        if self.stage:
            return f"[{self.stage}] {type(self).__name__}: {msg}"
        return msg


class AsymmetricInput(AdpError, ValueError):
    pass


class DimensionMismatch(AdpError, ValueError):
    pass


class InsufficientQuadrature(AdpError, ValueError):
    pass


class RankDeficient(AdpError):
    pass


class NonFiniteState(AdpError, FloatingPointError):
    pass


class RiccatiBlowup(AdpError):
    pass


class NoConvergence(AdpError):
    pass


class SingularR(AdpError, ValueError):
    pass


class Misconfiguration(AdpError, ValueError):
    pass


class TooFewRows(AdpError):
    pass


class Blowup(AdpError):
    pass


class HorizonTooShort(AdpError, ValueError):
    pass


class BadWindow(AdpError, ValueError):
    pass


class DivergentCost(AdpError):
    pass
