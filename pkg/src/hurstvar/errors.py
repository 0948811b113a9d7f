"""Exception types. The CLI maps each one to a stable exit code."""


class HurstVarError(Exception):
    exit_code = 1


class DomainError(HurstVarError, ValueError):
    """A parameter lies outside the range where the object is defined."""
    exit_code = 2


class InputError(HurstVarError):
    """A file could not be read or parsed."""
    exit_code = 3


class DegenerateInputError(HurstVarError, ValueError):
    """The data carry no information, e.g. a path with zero quadratic variation."""
    exit_code = 4


class QuadratureError(HurstVarError, ArithmeticError):
    """A quadrature could not certify the requested tolerance."""
    exit_code = 5


def check_hurst(H, lo=0.5, hi=1.0, what="H"):
    """Raise DomainError unless lo < H < hi; return H as float."""
    try:
        H = float(H)
    except (TypeError, ValueError):
        raise DomainError(f"{what} must be a real number, got {H!r}") from None
    if not (lo < H < hi):
        raise DomainError(f"{what} must lie in ({lo:g}, {hi:g}), got {H:g}")
    return H
