"""Integrals of cyclic products of |x - y + k|^(H-1) over unit blocks.

Splitting [0,1] into N cells of width 1/N and rescaling each cell to
[0,1], every second- and fourth-order moment of the quadratic variation of
the Rosenblatt process becomes a sum over cell lags k of the integrals below
(alpha = H - 1 throughout):

    two(k)   = int_[0,1]^2 |u - w + k|^(2 alpha)
    three(k) = int_[0,1]^3 (|u - v| |u - w + k| |v - w + k|)^alpha
    gg(k)    = int_[0,1]^4 (|u - v| |u' - v'| |u - u' + k| |v - v' + k|)^alpha
    cross(k) = int_[0,1]^4 (|u - v + k| |v - u' - k| |u' - v' + k| |v' - u - k|)^alpha

Integrating out one variable of each chain gives Phi from `kernels.phi`,
leaving 2-d integrals that `kernels.square_rule` resolves including the
diagonal and corner singularities. For large lags the integrands are smooth
and a plain Gauss-Jacobi tensor rule is cheaper (`three_smooth`, `gg_smooth`).
"""
import numpy as np

from .kernels import pair_rule, phi, square_rule, gauss_legendre

_RULE_CACHE = {}


def _square(levels, q):
    key = (levels, q)
    if key not in _RULE_CACHE:
        _RULE_CACHE[key] = square_rule(levels, q)
    return _RULE_CACHE[key]


def two(k, H):
    """Closed form (|k+1|^2H + |k-1|^2H - 2|k|^2H) / (2H(2H-1))."""
    k = np.abs(np.asarray(k, float))
    return (np.abs(k + 1) ** (2 * H) + np.abs(k - 1) ** (2 * H) - 2 * k ** (2 * H)) / (
        2 * H * (2 * H - 1))


def three(k, H, levels=40, q=10):
    alpha = H - 1
    u, v, s, w = _square(levels, q)
    return float(np.sum(w * s ** alpha * phi(u + k, v + k, alpha)))


def gg(k, H, levels=40, q=10):
    alpha = H - 1
    u, v, s, w = _square(levels, q)
    return float(np.sum(w * phi(u, v - k, alpha) * phi(v, u + k, alpha)))


def cross(k, H, levels=40, q=10):
    alpha = H - 1
    u, v, s, w = _square(levels, q)
    return float(np.sum(w * phi(u + k, v + k, alpha) ** 2))


def three_smooth(k, H, n=24):
    """three(k) by a tensor rule; accurate once |k| >= 2."""
    alpha = H - 1
    u, v, w = pair_rule(alpha, n, n)
    z, wz = gauss_legendre(n)
    a = np.abs(u[:, None] - z[None, :] + k) ** alpha
    b = np.abs(v[:, None] - z[None, :] + k) ** alpha
    return float(w @ (a * b) @ wz)


def gg_smooth(k, H, n=24):
    """gg(k) by a tensor rule; accurate once |k| >= 2."""
    alpha = H - 1
    u, v, w = pair_rule(alpha, n, n)
    a = np.abs(u[:, None] - u[None, :] + k) ** alpha
    b = np.abs(v[:, None] - v[None, :] + k) ** alpha
    return float(w @ (a * b) @ w)


def cross_smooth(k, H, n=24):
    """cross(k) by a Gauss-Legendre tensor rule; accurate once |k| >= 2."""
    alpha = H - 1
    x, wx = gauss_legendre(n)
    # Phi(u + k, u' + k) with the inner variable integrated by the same rule
    a = np.abs(x[:, None] + k - x[None, :]) ** alpha      # (u, z)
    ph = (a * wx[None, :]) @ a.T                             # (u, u')
    return float(wx @ (ph ** 2) @ wx)
