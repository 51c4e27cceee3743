"""Exception hierarchy shared by all pipeline stages."""


class IELError(Exception):
    """Base class; ``exit_code`` is what the CLI returns when this escapes."""

    exit_code = 1


class DomainError(IELError, ValueError):
    pass


class StateEscaped(IELError):
    """A trajectory left the inflated working box."""


class NonFinite(IELError, ArithmeticError):
    pass


class EmptyResult(IELError):
    exit_code = 6


class EmptyInput(IELError, ValueError):
    pass


class InvalidDim(IELError, ValueError):
    pass


class NonHyperbolic(IELError):
    exit_code = 4


class UntrustedSplitting(NonHyperbolic):
    pass


class OrbitNotClosed(IELError):
    pass


class NoCycle(IELError):
    pass


class Uncoverable(IELError):
    exit_code = 3

    def __init__(self, cells, msg=None):
        self.cells = sorted(int(c) for c in cells)
        head = ", ".join(str(c) for c in self.cells[:10])
        more = "" if len(self.cells) <= 10 else f" (+{len(self.cells) - 10} more)"
        super().__init__(msg or f"no candidate signal covers cells [{head}]{more}")


class InsufficientData(IELError, ValueError):
    pass


class InitialStateOutsideK(IELError, ValueError):
    pass


class EncoderMiss(IELError):
    pass


class NoPass(IELError):
    exit_code = 5


class ReferenceFailed(IELError):
    pass


class ConfigInvalid(IELError, ValueError):
    exit_code = 2

    def __init__(self, problems):
        # problems: list of (json_pointer, message)
        self.problems = list(problems)
        lines = [f"{ptr or '/'}: {msg}" for ptr, msg in self.problems]
        super().__init__("invalid config:\n  " + "\n  ".join(lines))
