"""Sample paths of fBm and of the Rosenblatt process on the grid {i/N}.

Generators
----------
circulant    fGn by circulant embedding (Davies-Harte), O(n log n)
cholesky     fGn by dense Cholesky, small n only (also the embedding fallback)
nclt         Rosenblatt: partial sums of squared long-memory Gaussians
kernel_grid  Rosenblatt: double Wiener-Ito integral of the kernel L_t,
             projected on a grid of Brownian increments (slow oracle)
"""
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .constants import rho
from .errors import DomainError, check_hurst
from .kernels import dK_cell, gauss_legendre

_CLAMP = 1e-9
MAX_DENSE = 8192


@dataclass(frozen=True)
class SeedStream:
    """A (master_seed, stream_index) pair naming one independent random stream.

    Streams come from numpy's SeedSequence spawning tree, so different
    stream indices under the same master seed are statistically independent.
    """
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise DomainError("master_seed must be a 64-bit unsigned integer")
        if int(self.stream_index) < 0:
            raise DomainError("stream_index must be non-negative")

    def generator(self):
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_index),))
        return np.random.Generator(np.random.PCG64(ss))


def _as_rng(seed):
    if isinstance(seed, SeedStream):
        return seed.generator()
    if isinstance(seed, np.random.Generator):
        return seed
    return SeedStream(int(seed)).generator()


@dataclass
class Path:
    """Samples X(i/N), i = 0..N, with what is needed to regenerate them."""
    H: float
    N: int
    values: np.ndarray
    kind: str
    generator: str
    seed: int | None = None
    stream: int = 0
    inner_refine: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.N + 1,):
            raise DomainError(f"expected {self.N + 1} values, got {self.values.shape}")

    @property
    def times(self):
        return np.arange(self.N + 1) / self.N

    @property
    def increments(self):
        return np.diff(self.values)


# ---------------------------------------------------------------------------
# stationary Gaussian sequences

@lru_cache(maxsize=16)
def _embedding(acov_key, n):
    kind, param = acov_key
    k = np.arange(n + 1, dtype=float)
    r = rho(param, k)
    if kind == "sqrt":
        r = np.sqrt(r)
    row = np.concatenate([r, r[-2:0:-1]]) if n > 1 else r[:1]
    lam = np.fft.fft(row).real
    if lam.min() < -_CLAMP * max(1.0, lam.max()):
        return None
    return np.sqrt(np.clip(lam, 0, None) / len(row))


@lru_cache(maxsize=8)
def _cholesky(acov_key, n):
    if n > MAX_DENSE:
        raise DomainError(f"dense Cholesky limited to n <= {MAX_DENSE}, got {n}")
    kind, param = acov_key
    r = rho(param, np.arange(n, dtype=float))
    if kind == "sqrt":
        r = np.sqrt(r)
    idx = np.arange(n)
    return np.linalg.cholesky(r[np.abs(idx[:, None] - idx[None, :])])


def _stationary(acov_key, n, rng, size=None, method="circulant"):
    """Draw stationary Gaussian sequences; returns (array, method actually used).

    rng is a Generator (size rows drawn from it, or a single vector when size
    is None) or a list of Generators (one row from each, in order).
    """
    if isinstance(rng, (list, tuple)):
        rngs, shape = list(rng), (len(rng), n)
    else:
        rows = 1 if size is None else size
        rngs, shape = None, ((n,) if size is None else (size, n))
    if method == "circulant":
        sq = _embedding(acov_key, n)
        if sq is not None:
            m = len(sq)
            if rngs is None:
                z = rng.standard_normal((rows, m)) + 1j * rng.standard_normal((rows, m))
            else:
                z = np.empty((len(rngs), m), dtype=complex)
                for i, g in enumerate(rngs):
                    z[i].real = g.standard_normal(m)
                    z[i].imag = g.standard_normal(m)
            out = np.fft.fft(sq * z, axis=1).real[:, :n]
            return out.reshape(shape), "circulant"
    elif method != "cholesky":
        raise DomainError(f"unknown method {method!r}")
    L = _cholesky(acov_key, n)
    if rngs is None:
        z = rng.standard_normal(shape)
    else:
        z = np.stack([g.standard_normal(n) for g in rngs])
    return z @ L.T, "cholesky"


def fgn(H, n, seed, size=None, method="circulant"):
    """Unit-variance fractional Gaussian noise: Cov(g_i, g_{i+k}) = rho_H(k).

    Circulant embedding with FFT; eigenvalues above -1e-9 (relative) are
    clamped to 0, anything more negative switches to dense Cholesky.
    `size` draws that many independent sequences as rows.
    """
    H = check_hurst(H)
    n = int(n)
    if n < 1:
        raise DomainError("n must be at least 1")
    out, _ = _stationary(("fgn", H), n, _as_rng(seed), size, method)
    return out


def _seed_fields(seed):
    if isinstance(seed, SeedStream):
        return int(seed.master_seed), int(seed.stream_index)
    if isinstance(seed, np.random.Generator):
        return None, 0
    return int(seed), 0


def fbm_path(H, N, seed, method="circulant"):
    """fBm on {i/N}: cumulative sums of N^-H scaled fGn, X(0) = 0."""
    H = check_hurst(H)
    N = int(N)
    if N < 2:
        raise DomainError("N must be at least 2")
    g, used = _stationary(("fgn", H), N, _as_rng(seed), None, method)
    values = np.concatenate([[0.0], np.cumsum(g)]) * N ** (-H)
    master, stream = _seed_fields(seed)
    return Path(H, N, values, "fbm", used, master, stream)


# ---------------------------------------------------------------------------
# Rosenblatt process, noncentral limit construction

def nclt_constant(Hprime, n):
    """C_n = (2 sum_{|k|<n} (n-|k|) rho_{H'}(k)^2)^(-1/2), so that Var(C_n sum_{j<=n} H2(xi_j)) = 1."""
    k = np.arange(1, n, dtype=float)
    s = n + 2 * math.fsum((n - k) * rho(Hprime, k) ** 2)
    return 1 / math.sqrt(2 * s)


def rosenblatt_increments_nclt(H, N, inner_refine, rng, size=None, inner="matched",
                               method="circulant"):
    """Increments Z(i/N) - Z((i-1)/N) from n = N * inner_refine squared Gaussians.

    inner="matched": the Gaussians have autocovariance sqrt(rho_H(k)), so
        (xi^2 - 1)/sqrt(2) has exactly the fGn(H) autocovariance rho_H(k).
        Increments are n^-H (xi^2 - 1)/sqrt(2) summed over blocks; every
        second-order quantity on the coarse grid is exact at any refinement.
    inner="fgn": the Gaussians are fGn with index H' and the sum is scaled
        by C_n; only Var Z(1) = 1 is exact.

    Both have autocovariance decaying like k^(H-1) and converge to the
    Rosenblatt process as inner_refine grows. Returns (array, method).
    """
    H = check_hurst(H)
    m = int(inner_refine)
    if m < 1:
        raise DomainError("inner_refine must be positive")
    n = N * m
    if inner == "matched":
        xi, used = _stationary(("sqrt", H), n, rng, size, method)
        scale = n ** (-H) / math.sqrt(2)
    elif inner == "fgn":
        Hp = (H + 1) / 2
        xi, used = _stationary(("fgn", Hp), n, rng, size, method)
        scale = nclt_constant(Hp, n)
    else:
        raise DomainError(f"unknown inner covariance {inner!r}")
    h = xi * xi - 1
    blocks = h.reshape(h.shape[:-1] + (N, m)).sum(axis=-1)
    return blocks * scale, used


def rosenblatt_path_nclt(H, N, inner_refine=64, seed=0, inner="matched", method="circulant"):
    """Rosenblatt path on {i/N} from the noncentral limit construction.

    See `rosenblatt_increments_nclt`. inner_refine >= 8 is required.
    """
    H = check_hurst(H)
    N = int(N)
    if N < 2:
        raise DomainError("N must be at least 2")
    if int(inner_refine) < 8:
        raise DomainError("inner_refine must be at least 8")
    inc, used = rosenblatt_increments_nclt(H, N, inner_refine, _as_rng(seed), None, inner, method)
    values = np.concatenate([[0.0], np.cumsum(inc)])
    master, stream = _seed_fields(seed)
    return Path(H, N, values, "rosenblatt", "nclt", master, stream, int(inner_refine),
                meta={"inner_covariance": inner, "gaussian_method": used})


# ---------------------------------------------------------------------------
# Rosenblatt process, kernel discretization

MAX_KERNEL_N = 64
MAX_KERNEL_M = 256


@lru_cache(maxsize=8)
def _kernel_grid(H, N, M, q=6):
    """Quadrature in u and cell integrals of dK for the projected kernel.

    Returns (kappa, weights, owner): kappa[j, k] = int_{cell k} dK(u_j, y) dy
    at quadrature node u_j, weights[j] the u-weights, owner[j] the index i of
    the grid interval ((i-1)/N, i/N] containing u_j.
    """
    Hp = (H + 1) / 2
    h = 1.0 / M
    cuts = np.union1d(np.arange(M + 1) * h, np.arange(N + 1) / N)
    cuts = cuts[(cuts >= 0) & (cuts <= 1)]
    w_gl, wt_gl = gauss_legendre(q)
    p = 1.0 / (Hp - 0.5)
    nodes, weights = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        # every panel starts at a point where some cell integral has a
        # (u - lo)^(H'-1/2) onset; u = lo + (hi-lo) w^p makes that term linear
        nodes.append(lo + (hi - lo) * w_gl ** p)
        weights.append((hi - lo) * p * w_gl ** (p - 1) * wt_gl)
    u = np.concatenate(nodes)
    wu = np.concatenate(weights)
    edges = np.arange(M + 1) * h
    kappa = dK_cell(u[:, None], edges[None, :-1], edges[None, 1:], Hp)
    owner = np.minimum((u * N).astype(int), N - 1)
    return kappa, wu, owner


def _d_of(H):
    return math.sqrt(2 * (2 * H - 1)) / ((H + 1) * math.sqrt(H))


@lru_cache(maxsize=8)
def _kernel_blocks(H, N, M):
    """Quadratic-form matrices of the projected increments and the Gaussian completion.

    Increment i of the projected process is xi^T B_i xi - tr B_i. Returns
    (B, completion_factor, lost) where completion_factor @ g (g standard normal)
    has covariance  N^-2H rho_H(|i-j|) - 2 tr(B_i B_j), i.e. what the
    projection misses of the exact increment covariance, and lost is the
    variance of Z(1) carried by the completion.
    """
    kappa, wu, owner = _kernel_grid(H, N, M)
    scale = _d_of(H) * M
    B = np.empty((N, M, M))
    for i in range(N):
        sel = owner == i
        B[i] = scale * (kappa[sel].T @ (wu[sel, None] * kappa[sel]))
    flat = B.reshape(N, -1)
    idx = np.arange(N)
    target = N ** (-2 * H) * rho(H, np.abs(idx[:, None] - idx[None, :]).astype(float))
    rem = target - 2 * flat @ flat.T
    w, V = np.linalg.eigh(rem)
    factor = V * np.sqrt(np.clip(w, 0, None))
    return B, factor, float(rem.sum())


def kernel_grid_variance(H, M, N=1):
    """Var of the projected Z(1) with M cells (no completion): 2 ||kappa^T W kappa||_F^2 (d/h)^2."""
    H = check_hurst(H)
    kappa, wu, _ = _kernel_grid(H, int(N), int(M))
    G = kappa.T @ (wu[:, None] * kappa)
    return 2 * (_d_of(H) * M) ** 2 * float(np.sum(G * G))


def kernel_grid_cumulants(H, M, N=32, complete=True):
    """Exact (variance, skewness, excess kurtosis) of Z(1) from the kernel-grid generator.

    Z(1) = xi^T A xi - tr A (+ independent Gaussian when complete) has
    cumulants k_r = 2^(r-1) (r-1)! tr A^r, plus the completion variance.
    """
    H = check_hurst(H)
    B, _, lost = _kernel_blocks(H, int(N), int(M))
    ev = np.linalg.eigvalsh(B.sum(axis=0))
    k2 = 2 * np.sum(ev ** 2) + (lost if complete else 0.0)
    k3 = 8 * np.sum(ev ** 3)
    k4 = 48 * np.sum(ev ** 4)
    return float(k2), float(k3 / k2 ** 1.5), float(k4 / k2 ** 2)


def rosenblatt_increments_kernel(H, N, M, rng, size=None, complete=True):
    """Increments of Z on {i/N} from M Brownian cell increments, as an array.

    complete=True adds the independent Gaussian completion (see
    `rosenblatt_path_kernel`).
    """
    kappa, wu, owner = _kernel_grid(H, N, M)
    rows = 1 if size is None else size
    xi = rng.standard_normal((M, rows))
    S = kappa @ xi
    centered = S * S - np.sum(kappa * kappa, axis=1)[:, None]
    contrib = (wu[:, None] * centered) * (_d_of(H) * M)
    inc = np.zeros((N, rows))
    np.add.at(inc, owner, contrib)
    if complete:
        _, factor, _ = _kernel_blocks(H, N, M)
        inc += factor @ rng.standard_normal((N, rows))
    inc = inc.T
    return inc[0] if size is None else inc


def rosenblatt_path_kernel(H, N, M=200, seed=0, complete=True):
    """Rosenblatt path from the kernel representation Z(t) = I2(L_t).

    The Brownian motion is represented by M independent cell increments
    dW_k = sqrt(h) xi_k (h = 1/M), and L_t is replaced by its cell averages.
    The double integral of that step kernel, including the Wick-centred
    diagonal cells, is
        Z_M(t) = (d/h) int_0^t [S(u)^2 - E S(u)^2] du,
        S(u) = sum_k xi_k int_{cell k} dK(u, y) dy,
    with the cell integrals in closed form and a graded Gauss rule in u.

    The step kernel captures the large eigenvalues of L_1 but misses a tail
    of small ones that holds about M^(1-2H) of the variance (0.19 at H=0.6,
    M=200). With complete=True that tail is replaced by an independent
    Gaussian increment vector whose covariance is exactly the missing part of
    the fBm increment covariance, so the grid covariance is exact and the
    third cumulant keeps what the projection captured. Oracle scale only:
    N <= 64, M <= 256.
    """
    H = check_hurst(H)
    N, M = int(N), int(M)
    if not 2 <= N <= MAX_KERNEL_N:
        raise DomainError(f"kernel generator needs 2 <= N <= {MAX_KERNEL_N}")
    if not 1 <= M <= MAX_KERNEL_M:
        raise DomainError(f"kernel generator needs 1 <= M <= {MAX_KERNEL_M}")
    inc = rosenblatt_increments_kernel(H, N, M, _as_rng(seed), complete=complete)
    values = np.concatenate([[0.0], np.cumsum(inc)])
    master, stream = _seed_fields(seed)
    meta = {"grid_cells": M, "gaussian_completion": bool(complete)}
    if complete:
        meta["completion_variance"] = _kernel_blocks(H, N, M)[2]
    return Path(H, N, values, "rosenblatt", "kernel_grid", master, stream, meta=meta)


def batch_increments(kind, H, N, streams, generator=None, inner_refine=64, grid_cells=200,
                     inner="matched"):
    """Increments of len(streams) independent paths, one row per SeedStream.

    Row r has the distribution of `simulate(..., seed=streams[r]).increments`;
    the Gaussian draws are made stream by stream and transformed together.
    """
    H = check_hurst(H)
    N = int(N)
    streams = list(streams)
    # bound the working set at about 64 MB of complex draws per chunk
    n = N * (inner_refine if kind == "rosenblatt" and (generator or "nclt") == "nclt" else 1)
    chunk = max(1, (1 << 22) // (2 * n))
    if len(streams) > chunk:
        return np.concatenate([
            batch_increments(kind, H, N, streams[i:i + chunk], generator, inner_refine,
                             grid_cells, inner)
            for i in range(0, len(streams), chunk)])
    rngs = [_as_rng(s) for s in streams]
    if kind == "fbm":
        g, _ = _stationary(("fgn", H), N, rngs, None, generator or "circulant")
        return g * N ** (-H)
    if kind != "rosenblatt":
        raise DomainError(f"unknown process kind {kind!r}")
    generator = generator or "nclt"
    if generator == "nclt":
        inc, _ = rosenblatt_increments_nclt(H, N, inner_refine, rngs, inner=inner)
        return inc
    if generator in ("kernel", "kernel_grid"):
        return np.stack([rosenblatt_increments_kernel(H, N, grid_cells, g) for g in rngs])
    raise DomainError(f"rosenblatt supports nclt or kernel, not {generator!r}")


def simulate(kind, H, N, seed, generator=None, inner_refine=64, grid_cells=200,
             inner="matched"):
    """Dispatch on (kind, generator) and return a Path."""
    if kind == "fbm":
        generator = generator or "circulant"
        if generator not in ("circulant", "cholesky"):
            raise DomainError(f"fbm supports circulant or cholesky, not {generator!r}")
        return fbm_path(H, N, seed, generator)
    if kind == "rosenblatt":
        generator = generator or "nclt"
        if generator == "nclt":
            return rosenblatt_path_nclt(H, N, inner_refine, seed, inner)
        if generator in ("kernel", "kernel_grid"):
            return rosenblatt_path_kernel(H, N, grid_cells, seed)
        raise DomainError(f"rosenblatt supports nclt or kernel, not {generator!r}")
    raise DomainError(f"unknown process kind {kind!r}")
