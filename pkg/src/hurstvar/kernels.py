"""Volterra kernels of fBm and the Rosenblatt process, and the quadrature they need.

All kernels are written in terms of H' = (H+1)/2, the Hurst index of the
fBm whose kernel builds the Rosenblatt process of index H.

The quadrature tools handle integrands with algebraic endpoint singularities
(x - a)^alpha, alpha > -1, which appear everywhere below.
"""
import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, QuadratureError, check_hurst


@dataclass(frozen=True)
class QuadratureSpec:
    """Settings for `integrate_singular`.

    singularity_exponent is the power alpha of the endpoint singularity
    (x - a)^alpha; it is applied at both ends unless overridden per call.
    """
    abs_tol: float = 1e-11
    max_subdivisions: int = 2000
    singularity_exponent: float = 0.0

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise DomainError(f"abs_tol must be positive, got {self.abs_tol}")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be at least 1")
        if not self.singularity_exponent > -1:
            raise DomainError("singularity_exponent must exceed -1 for integrability, "
                              f"got {self.singularity_exponent}")


_GL_LO = np.polynomial.legendre.leggauss(10)
_GL_HI = np.polynomial.legendre.leggauss(21)


def _panel(g, a, b):
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    lo = h * np.dot(_GL_LO[1], g(c + h * _GL_LO[0]))
    hi = h * np.dot(_GL_HI[1], g(c + h * _GL_HI[0]))
    return hi, abs(hi - lo)


def _adaptive(g, tol, max_panels):
    """Globally adaptive bisection on [0, 1] with a 10/21-point Gauss pair."""
    val, err = _panel(g, 0.0, 1.0)
    heap = [(-err, 0.0, 1.0, val)]
    total, total_err = val, err
    n = 1
    while total_err > tol:
        if n >= max_panels:
            raise QuadratureError(f"no convergence after {n} subdivisions "
                                  f"(error estimate {total_err:.3g} > tol {tol:.3g})")
        e, a, b, v = heapq.heappop(heap)
        m = 0.5 * (a + b)
        v1, e1 = _panel(g, a, m)
        v2, e2 = _panel(g, m, b)
        total += v1 + v2 - v
        total_err += e1 + e2 + e
        heapq.heappush(heap, (-e1, a, m, v1))
        heapq.heappush(heap, (-e2, m, b, v2))
        n += 1
    # recompute from the panels to shed accumulated rounding
    return math.fsum(item[3] for item in heap)


def _vectorized(f):
    def g(x):
        y = f(x)
        if np.ndim(y) == 0:
            y = np.array([f(xi) for xi in x], dtype=float)
        return np.asarray(y, dtype=float)
    return g


def integrate_singular(f, a, b, quad=None, left=None, right=None):
    """Integral of f over (a, b) for integrands with endpoint power singularities.

    The interval is split at its midpoint. On each half the singular end is
    removed by the substitution x = a + h*w**p with p = 1/(1 + alpha), which
    turns (x - a)^alpha dx into a bounded density; the result is then
    integrated by adaptive Gauss bisection in w.

    Nodes very close to a singular end round onto it when the end is far
    from 0 (a + tiny == a). Callers with a singularity at x = c != 0 should
    integrate in x - c so that the singular factor is evaluated exactly.

    Parameters
    ----------
    f : callable
        Integrand. Called with arrays when it supports them; scalar-only
        callables are looped over.
    a, b : float
        Finite limits, a < b (a > b flips the sign).
    quad : QuadratureSpec, optional
    left, right : float, optional
        Exponent of the singularity at a and at b; default to
        quad.singularity_exponent.

    Returns
    -------
    float, with certified absolute error at most quad.abs_tol.
    """
    quad = quad or QuadratureSpec()
    if a == b:
        return 0.0
    if a > b:
        return -integrate_singular(f, b, a, quad, left=right, right=left)
    left = quad.singularity_exponent if left is None else left
    right = quad.singularity_exponent if right is None else right
    if left <= -1 or right <= -1:
        raise DomainError("endpoint exponents must exceed -1")
    f = _vectorized(f)
    h = 0.5 * (b - a)
    p_l = 1.0 / (1.0 + left) if left < 0 else 1.0
    p_r = 1.0 / (1.0 + right) if right < 0 else 1.0

    def g_left(w):
        return f(a + h * w ** p_l) * (h * p_l * w ** (p_l - 1))

    def g_right(w):
        return f(b - h * w ** p_r) * (h * p_r * w ** (p_r - 1))

    half = quad.max_subdivisions // 2 or 1
    return (_adaptive(g_left, 0.5 * quad.abs_tol, half)
            + _adaptive(g_right, 0.5 * quad.abs_tol, half))


# ---------------------------------------------------------------------------
# fixed tensor rules used by the block integrals

def gauss_legendre(n, a=0.0, b=1.0):
    x, w = np.polynomial.legendre.leggauss(n)
    return a + (b - a) * (x + 1) / 2, w * (b - a) / 2


def graded_rule(levels=30, q=10, ratio=0.15):
    """Composite Gauss rule on [0, 1], geometrically refined toward both ends.

    Panels shrink by `ratio` toward 0 and toward 1, `levels` times each side,
    with q Gauss-Legendre points per panel. Integrates functions with power
    or log singularities at 0 and 1 (and nearby) with geometric accuracy.
    """
    half = np.concatenate([[0.0], 0.5 * ratio ** np.arange(levels, -1, -1)])
    nodes, weights = [], []
    for lo, hi in zip(half[:-1], half[1:]):
        x, w = gauss_legendre(q, lo, hi)
        nodes += [x, 1 - x]
        weights += [w, w]
    return np.concatenate(nodes), np.concatenate(weights)


def square_rule(levels=30, q=10, ratio=0.15):
    """Rule on [0,1]^2 adapted to the diagonal, the edges and the corners.

    Each triangle u > v and u < v is parametrized by the gap s = |u - v| and
    the position t along the strip, (u, v) = ((1-s)t + s, (1-s)t) and mirror;
    both s and t use `graded_rule`. The diagonal sits at s = 0, the edges at
    t = 0 and t = 1, the off-diagonal corners at s = 1. Weights include the
    Jacobian 1 - s. Returns (u, v, s, w) with s = |u - v| kept exactly.
    """
    x, wx = graded_rule(levels, q, ratio)
    s, t = np.meshgrid(x, x, indexing="ij")
    w = np.outer(wx, wx) * (1 - s)
    lower = (1 - s) * t
    s, lower, w = s.ravel(), lower.ravel(), w.ravel()
    u = np.concatenate([lower + s, lower])
    v = np.concatenate([lower, lower + s])
    return u, v, np.concatenate([s, s]), np.concatenate([w, w])


def pair_rule(alpha, n_s=24, n_t=24):
    """Rule on [0,1]^2 for integrands |u - v|^alpha * g(u, v) with g smooth.

    Gauss-Jacobi in the gap s = |u - v| carries the weight s^alpha (1 - s)
    exactly; Gauss-Legendre in the position along the strip. The weights
    returned include |u - v|^alpha.
    """
    x, wx = special.roots_jacobi(n_s, 1.0, alpha)        # weight (1-x)(1+x)^alpha
    s = (x + 1) / 2
    ws = wx / 2 ** (alpha + 2)
    t, wt = gauss_legendre(n_t)
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt).ravel()
    lower = ((1 - S) * T).ravel()
    S = S.ravel()
    u = np.concatenate([lower + S, lower])
    v = np.concatenate([lower, lower + S])
    return u, v, np.concatenate([W, W])


# ---------------------------------------------------------------------------
# closed-form building blocks

def _power_pair_tail(delta, T, alpha):
    """P(delta, T) = int_0^T w^alpha (w + delta)^alpha dw for T >= 0, delta >= 0."""
    delta, T = np.broadcast_arrays(np.asarray(delta, float), np.asarray(T, float))
    out = np.zeros(delta.shape)
    pos = (T > 0) & (delta > 0)
    r = T[pos] / delta[pos]
    q = r ** (alpha + 1) / (alpha + 1) * special.hyp2f1(-alpha, alpha + 1, alpha + 2, -r)
    out[pos] = delta[pos] ** (2 * alpha + 1) * q
    zero = (T > 0) & (delta == 0)
    out[zero] = T[zero] ** (2 * alpha + 1) / (2 * alpha + 1)
    return out


def phi(x, y, alpha):
    """Phi(x, y) = int_0^1 |z - x|^alpha |z - y|^alpha dz in closed form.

    x and y may be any reals (arrays broadcast); alpha in (-1/2, 0) so that
    the coincident case x = y stays finite. Built from Beta functions and
    2F1 on the three stretches of [0, 1] cut by x and y.
    """
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    shape = x.shape
    x, y = x.ravel(), y.ravel()
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    delta = hi - lo
    P = _power_pair_tail
    out = (P(delta, np.maximum(lo, 0), alpha) - P(delta, np.maximum(lo - 1, 0), alpha)
           + P(delta, np.maximum(1 - hi, 0), alpha) - P(delta, np.maximum(-hi, 0), alpha))
    a_, b_ = np.clip(lo, 0, 1), np.clip(hi, 0, 1)
    mid = (b_ > a_) & (delta > 0)
    if np.any(mid):
        d = delta[mid]
        beta = special.beta(alpha + 1, alpha + 1)
        inc = (special.betainc(alpha + 1, alpha + 1, (b_[mid] - lo[mid]) / d)
               - special.betainc(alpha + 1, alpha + 1, (a_[mid] - lo[mid]) / d))
        out[mid] += d ** (2 * alpha + 1) * beta * inc
    return out.reshape(shape) if shape else float(out[0])


# ---------------------------------------------------------------------------
# the fBm kernel

def _check_hprime(Hprime):
    return check_hurst(Hprime, 0.5, 1.0, "Hprime")


def kernel_constant(Hprime):
    """c_K = sqrt(H'(2H'-1) / Beta(2-2H', H'-1/2)), Beta taken through log-Gamma."""
    Hp = _check_hprime(Hprime)
    a, b = 2 - 2 * Hp, Hp - 0.5
    log_beta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    return math.sqrt(Hp * (2 * Hp - 1) * math.exp(-log_beta))


def dK(u, y, Hprime):
    """First-argument derivative of the fBm kernel, c_K (u/y)^(H'-1/2) (u-y)^(H'-3/2).

    Defined for 0 < y < u; raises DomainError otherwise. Broadcasts.
    """
    cK = kernel_constant(Hprime)
    u, y = np.asarray(u, float), np.asarray(y, float)
    if np.any(y <= 0) or np.any(y >= u):
        raise DomainError("dK(u, y) needs 0 < y < u")
    out = cK * (u / y) ** (Hprime - 0.5) * (u - y) ** (Hprime - 1.5)
    return out if out.ndim else float(out)


def K(t, s, Hprime):
    """fBm Volterra kernel K(t, s) for 0 <= s <= t (zero for s >= t).

    Uses the hypergeometric closed form
    c_K (t-s)^(H'-1/2) / (H'-1/2) * 2F1(1/2-H', H'-1/2; H'+1/2; 1 - t/s).
    """
    cK = kernel_constant(Hprime)
    t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
    out = np.zeros(t.shape)
    ok = (s > 0) & (s < t)
    b = Hprime - 0.5
    out[ok] = (cK * (t[ok] - s[ok]) ** b / b
               * special.hyp2f1(-b, b, Hprime + 0.5, 1 - t[ok] / s[ok]))
    return out if out.ndim else float(out)


def K_by_quadrature(t, s, Hprime, quad=None):
    """K(t, s) from its defining integral c_K s^(1/2-H') int_s^t (u-s)^(H'-3/2) u^(H'-1/2) du."""
    if not 0 < s < t:
        return 0.0
    quad = quad or QuadratureSpec()
    cK = kernel_constant(Hprime)
    # integrate in r = u - s so the singular point sits at an exact zero
    val = integrate_singular(lambda r: r ** (Hprime - 1.5) * (s + r) ** (Hprime - 0.5),
                             0.0, t - s, quad, left=Hprime - 1.5, right=0.0)
    return cK * s ** (0.5 - Hprime) * val


def dK_cell(u, a, b, Hprime):
    """int_a^min(b,u) dK(u, y) dy in closed form (incomplete Beta); 0 when u <= a.

    With y = u*r the integrand becomes c_K u^(H'-1/2) r^(1/2-H') (1-r)^(H'-3/2).
    """
    cK = kernel_constant(Hprime)
    u, a, b = np.broadcast_arrays(np.asarray(u, float), np.asarray(a, float),
                                  np.asarray(b, float))
    p, q = 1.5 - Hprime, Hprime - 0.5
    out = np.zeros(u.shape)
    ok = u > a
    uu = u[ok]
    hi = special.betainc(p, q, np.minimum(b[ok] / uu, 1.0))
    lo = special.betainc(p, q, a[ok] / uu)
    out[ok] = cK * uu ** q * special.beta(p, q) * (hi - lo)
    return out


def kernel_product_integral(u, v, Hprime, quad=None):
    """int_0^min(u,v) dK(u,y) dK(v,y) dy by quadrature; equals a(H)|u-v|^(2H'-2).

    The integrand behaves like y^(1-2H') at 0 and like (m - y)^(H'-3/2) at
    m = min(u, v).
    """
    if u == v:
        raise DomainError("the kernel product integral diverges on the diagonal u = v")
    if min(u, v) <= 0:
        raise DomainError("u and v must be positive")
    quad = quad or QuadratureSpec()
    cK = kernel_constant(Hprime)
    m, M = min(u, v), max(u, v)

    def f(y):
        return y ** (1 - 2 * Hprime) * (m - y) ** (Hprime - 1.5) * (M - y) ** (Hprime - 1.5)

    def g(r):
        # same integrand in r = m - y, exact near the singular end y = m
        return (m - r) ** (1 - 2 * Hprime) * r ** (Hprime - 1.5) * (M - m + r) ** (Hprime - 1.5)

    half = QuadratureSpec(0.5 * quad.abs_tol, quad.max_subdivisions, quad.singularity_exponent)
    val = (integrate_singular(f, 0.0, 0.5 * m, half, left=1 - 2 * Hprime, right=0.0)
           + integrate_singular(g, 0.0, 0.5 * m, half, left=Hprime - 1.5, right=0.0))
    return cK ** 2 * (u * v) ** (Hprime - 0.5) * val


def kernel_identity_error(H, grid=None, quad=None):
    """Largest relative error of int dK(u,.)dK(v,.) = a(H)|u-v|^(H-1) over a grid of u != v."""
    H = check_hurst(H)
    Hp = (H + 1) / 2
    aH = H * (H + 1) / 2
    grid = np.linspace(0.1, 1.0, 10) if grid is None else np.asarray(grid, float)
    worst = 0.0
    for u in grid:
        for v in grid:
            if u == v:
                continue
            exact = aH * abs(u - v) ** (H - 1)
            rel = abs(kernel_product_integral(u, v, Hp, quad) - exact) / exact
            worst = max(worst, rel)
    return worst


def L(t, y1, y2, H, quad=None):
    """Rosenblatt kernel L_t(y1, y2) = d(H) int_{max(y1,y2)}^t dK(u,y1) dK(u,y2) du.

    Zero when max(y1, y2) >= t. On the diagonal y1 = y2 < t the integral
    diverges (the kernel is square integrable but not bounded) and +inf is
    returned.
    """
    H = check_hurst(H)
    if not (0 < t <= 1 and 0 < y1 < 1 and 0 < y2 < 1):
        raise DomainError("L needs t in (0, 1] and y1, y2 in (0, 1)")
    lo, hi = min(y1, y2), max(y1, y2)
    if hi >= t:
        return 0.0
    if lo == hi:
        return math.inf
    quad = quad or QuadratureSpec()
    Hp = (H + 1) / 2
    cK = kernel_constant(Hp)
    dH = math.sqrt(2 * (2 * H - 1)) / ((H + 1) * math.sqrt(H))

    gap = hi - lo

    def f(r):
        # r = u - hi, so the singular factor r^(H'-3/2) is evaluated exactly
        return (hi + r) ** (2 * Hp - 1) * r ** (Hp - 1.5) * (r + gap) ** (Hp - 1.5)

    val = integrate_singular(f, 0.0, t - hi, quad, left=Hp - 1.5, right=0.0)
    return dH * cK ** 2 * (lo * hi) ** (0.5 - Hp) * val


def covariance(t, s, H):
    """R^H(t, s) = (t^2H + s^2H - |t-s|^2H)/2, shared by fBm and the Rosenblatt process."""
    H = check_hurst(H)
    t, s = np.asarray(t, float), np.asarray(s, float)
    out = 0.5 * (np.abs(t) ** (2 * H) + np.abs(s) ** (2 * H) - np.abs(t - s) ** (2 * H))
    return out if out.ndim else float(out)
