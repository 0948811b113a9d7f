"""Quadratic-variation statistics and Hurst estimators for an observed path.

For increments dX_i = X(i/N) - X((i-1)/N):

    S_N   = (1/N) sum dX_i^2
    V_N   = N^(2H-1) sum (dX_i^2 - N^-2H) = S_N N^2H - 1
    H_hat = -log S_N / (2 log N)

so log(1 + V_N) = -2 (H_hat - H) log N exactly. The adjusted statistic
removes the second-chaos part of V_N using the observed endpoint Z(1):

    sqrt(N / sigma^2) (V_N - 4 d(H) N^(H-1) Z(1))

Every function here also has an array form (`*_batch`) acting on the last
axis of an increment array, used by the Monte-Carlo runner.
"""
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import constants
from .errors import DegenerateInputError, DomainError, check_hurst

REGIMES = ("fbm_lt34", "fbm_eq34", "fbm_gt34", "rosen")
ADJUSTED_HMAX = 2 / 3


def _increments(path):
    if hasattr(path, "values"):
        values = path.values
    else:
        values = np.asarray(path, dtype=float)
    if values.ndim != 1 or len(values) < 3:
        raise DomainError("a path needs at least N = 2 increments")
    return np.diff(values)


# ---------------------------------------------------------------------------
# array forms

def s_n_batch(increments):
    inc = np.asarray(increments, dtype=float)
    s = np.mean(inc * inc, axis=-1)
    if np.any(s <= 0):
        raise DegenerateInputError("degenerate path: all increments are zero")
    return s


def v_n_batch(increments, H_ref):
    inc = np.asarray(increments, dtype=float)
    N = inc.shape[-1]
    return s_n_batch(inc) * float(N) ** (2 * H_ref) - 1.0


def hurst_batch(increments):
    inc = np.asarray(increments, dtype=float)
    N = inc.shape[-1]
    return -np.log(s_n_batch(inc)) / (2 * math.log(N))


# ---------------------------------------------------------------------------
# path forms

def s_n(path):
    """(1/N) sum of squared increments; raises DegenerateInputError if all are zero."""
    return float(s_n_batch(_increments(path)))


def v_n(path, H_ref):
    """S_N N^(2 H_ref) - 1. H_ref is explicit: the true H is unknown to an estimator."""
    H_ref = check_hurst(H_ref, what="H_ref")
    return float(v_n_batch(_increments(path), H_ref))


def hurst_estimate(path):
    """H_hat = -log S_N / (2 log N)."""
    return float(hurst_batch(_increments(path)))


def _check_regime(H, regime):
    if regime == "fbm_lt34" and not H < 0.75:
        raise DomainError(f"regime fbm_lt34 needs H < 3/4, got H={H}")
    if regime == "fbm_eq34" and abs(H - 0.75) > 1e-12:
        raise DomainError(f"regime fbm_eq34 needs H = 3/4, got H={H}")
    if regime == "fbm_gt34" and not H > 0.75:
        raise DomainError(f"regime fbm_gt34 needs H > 3/4, got H={H}")
    if regime not in REGIMES:
        raise DomainError(f"unknown regime {regime!r}; expected one of {REGIMES}")


def standardize(V_N, N, H, regime):
    """Scale V_N by the rate and constant of its regime.

    fbm_lt34  sqrt(N / c1) V_N                    -> N(0, 1)
    fbm_eq34  sqrt(N / (c1' log N)) V_N           -> N(0, 1)
    fbm_gt34  sqrt(N^(4-4H) / c2) V_N             -> Rosenblatt, unit variance
    rosen     N^(1-H) V_N / sqrt(c3), sqrt(c3)=4d -> Z(1)

    Accepts scalars or arrays for V_N.
    """
    H = check_hurst(H)
    _check_regime(H, regime)
    N = int(N)
    V = np.asarray(V_N, dtype=float)
    if regime == "fbm_lt34":
        out = math.sqrt(N / constants.c1(H)) * V
    elif regime == "fbm_eq34":
        out = math.sqrt(N / (constants.c1_prime(H) * math.log(N))) * V
    elif regime == "fbm_gt34":
        out = math.sqrt(N ** (4 - 4 * H) / constants.c2(H)) * V
    else:
        out = N ** (1 - H) * V / math.sqrt(constants.c3(H))
    return out if out.ndim else float(out)


def _adjusted_scale(H, N, normalization, diagnostic):
    if not diagnostic and not H < ADJUSTED_HMAX:
        raise DomainError(f"the adjusted statistic needs H < 2/3 (Gaussian limit), got H={H}")
    if normalization == "printed":
        # f1 is undefined from 2/3 on; the diagnostic then runs with f1 = 0
        var = constants.e1(H) + (constants.f1(H) if H < ADJUSTED_HMAX else 0.0)
    elif normalization == "chaos" and H >= ADJUSTED_HMAX:
        # no finite limit; the exact variance at this N is the natural scale
        var = constants.adjusted_variance(H, N, "finite")
    else:
        var = constants.adjusted_variance(H, N, normalization)
    return math.sqrt(N / var)


def adjusted_batch(increments, H, normalization="chaos", diagnostic=False):
    """sqrt(N/sigma^2) [V_N - 4d N^(H-1) Z(1)] on the last axis of an increment array."""
    inc = np.asarray(increments, dtype=float)
    N = inc.shape[-1]
    z1 = inc.sum(axis=-1)
    core = v_n_batch(inc, H) - 4 * constants.d_of(H) * N ** (H - 1) * z1
    return _adjusted_scale(H, N, normalization, diagnostic) * core


def adjusted_estimator_batch(increments, H, normalization="chaos", diagnostic=False):
    """sqrt(N/sigma^2) [-2 log N (H_hat - H) - 4d N^(H-1) Z(1)]; -2 log N (H_hat - H) = log(1 + V_N)."""
    inc = np.asarray(increments, dtype=float)
    N = inc.shape[-1]
    z1 = inc.sum(axis=-1)
    core = -2 * math.log(N) * (hurst_batch(inc) - H) - 4 * constants.d_of(H) * N ** (H - 1) * z1
    return _adjusted_scale(H, N, normalization, diagnostic) * core


def adjusted_statistic(path, H, normalization="chaos", diagnostic=False):
    """Adjusted variation statistic, asymptotically N(0, 1) for 1/2 < H < 2/3.

    Z(1) is the observed endpoint X(1) - X(0). normalization selects the
    variance (see `constants.adjusted_variance`): "chaos" (limit, default),
    "finite" (exact at this N) or "printed" (e1 + f1 as printed).
    diagnostic=True lifts the H < 2/3 gate for rejection experiments.
    """
    H = check_hurst(H)
    return float(adjusted_batch(_increments(path), H, normalization, diagnostic))


def adjusted_estimator_statistic(path, H, normalization="chaos", diagnostic=False):
    """Estimator form of `adjusted_statistic`, built from H_hat instead of V_N."""
    H = check_hurst(H)
    return float(adjusted_estimator_batch(_increments(path), H, normalization, diagnostic))


# ---------------------------------------------------------------------------
# bundle

@dataclass
class StatBundle:
    N: int
    S_N: float
    H_hat: float
    H_ref: float | None = None
    V_N: float | None = None
    plug_in: bool = False
    standardized: dict = field(default_factory=dict)
    adjusted_stat: float | None = None
    adjusted_estimator_stat: float | None = None
    normalization: str | None = None

    def to_dict(self):
        return asdict(self)


def _default_regimes(H):
    regs = ["rosen"]
    if H < 0.75:
        regs.insert(0, "fbm_lt34")
    elif H > 0.75:
        regs.insert(0, "fbm_gt34")
    else:
        regs.insert(0, "fbm_eq34")
    return regs


def compute_bundle(path, H_ref=None, adjusted=False, plug_in=False, normalization="chaos"):
    """All statistics for one path.

    With plug_in=True the reference H is H_hat itself (H_ref must then be
    None); the bundle records it so that plug-in results are never mistaken
    for statistics centred at the true H.
    """
    inc = _increments(path)
    N = len(inc)
    S = float(s_n_batch(inc))
    H_hat = float(-math.log(S) / (2 * math.log(N)))
    if plug_in:
        if H_ref is not None:
            raise DomainError("plug_in uses H_hat; do not also pass H_ref")
        H_ref = H_hat
    bundle = StatBundle(N=N, S_N=S, H_hat=H_hat, plug_in=bool(plug_in))
    if H_ref is None:
        if adjusted:
            raise DomainError("adjusted statistics need H_ref or plug_in")
        return bundle
    H_ref = check_hurst(H_ref, what="H_ref")
    bundle.H_ref = H_ref
    bundle.V_N = float(S * N ** (2 * H_ref) - 1)
    for reg in _default_regimes(H_ref):
        if reg == "fbm_lt34" and H_ref > 0.75 - 1e-6:
            continue  # c1 blows up at 3/4
        bundle.standardized[reg] = standardize(bundle.V_N, N, H_ref, reg)
    if adjusted:
        bundle.adjusted_stat = float(adjusted_batch(inc, H_ref, normalization))
        bundle.adjusted_estimator_stat = float(adjusted_estimator_batch(inc, H_ref, normalization))
        bundle.normalization = normalization
    return bundle
