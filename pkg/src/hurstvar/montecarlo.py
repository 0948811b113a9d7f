"""Replicated experiments for the variation limit theorems, and lemma checks.

Each experiment simulates `replications` paths per N, reduces every path to
one statistic, and summarizes the sample: moments through a mergeable
accumulator, KS and Jarque-Bera against N(0, 1), a fixed-bin histogram, and
experiment-specific extras (mean squares, rate regressions).

Replication r at grid position g uses SeedStream(master_seed,
g * replications + r), so reports are a deterministic function of the config.
"""
import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import stats as sps

from . import blocks, constants, simulate, statistics
from .errors import DomainError, InputError, check_hurst

EXPERIMENTS = ("fbm_clt", "fbm_rosenblatt_limit", "fbm_log_regime", "rosen_l2_limit",
               "adjusted_normality", "estimator_rate")
HIST_EDGES = np.linspace(-5.0, 5.0, 41)


# ---------------------------------------------------------------------------
# tests and regressions

def ks_normal(samples):
    """One-sample Kolmogorov-Smirnov against N(0, 1) with the asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n < 50:
        raise InputError(f"KS needs at least 50 samples, got {n}")
    cdf = sps.norm.cdf(x)
    i = np.arange(1, n + 1)
    stat = float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))
    p = float(sps.kstwobign.sf(stat * math.sqrt(n)))
    return {"stat": stat, "p": min(max(p, 0.0), 1.0)}


def _central_moments(x):
    x = np.asarray(x, dtype=float)
    c = x - x.mean()
    return np.mean(c * c), np.mean(c ** 3), np.mean(c ** 4)


def jarque_bera(samples):
    """JB = n/6 (S^2 + K^2/4) from population moments, chi-square(2) p-value."""
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n < 100:
        raise InputError(f"Jarque-Bera needs at least 100 samples, got {n}")
    m2, m3, m4 = _central_moments(x)
    if m2 == 0:
        return {"stat": math.inf, "p": 0.0, "skew": 0.0, "excess_kurtosis": 0.0}
    skew = m3 / m2 ** 1.5
    kurt = m4 / m2 ** 2 - 3
    stat = n / 6 * (skew ** 2 + kurt ** 2 / 4)
    return {"stat": float(stat), "p": float(sps.chi2.sf(stat, 2)),
            "skew": float(skew), "excess_kurtosis": float(kurt)}


def rate_regression(curve):
    """OLS of log(value) on log(N) for a mapping N -> value; returns slope and its stderr."""
    Ns = np.array(sorted(curve), dtype=float)
    vals = np.array([curve[k] for k in sorted(curve)], dtype=float)
    if len(Ns) < 4:
        raise InputError("rate regression needs at least 4 grid points")
    if np.any(vals <= 0) or np.any(Ns <= 0):
        raise DomainError("rate regression needs positive N and values")
    x, y = np.log(Ns), np.log(vals)
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = len(x) - 2
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    return {"slope": float(coef[1]), "stderr": float(math.sqrt(max(cov[1, 1], 0.0))),
            "intercept": float(coef[0])}


# ---------------------------------------------------------------------------
# moments

@dataclass
class Moments:
    """Count, mean and central moment sums; merge() is associative and commutative."""
    n: int = 0
    mean: float = 0.0
    m2: float = 0.0
    m3: float = 0.0
    m4: float = 0.0

    @classmethod
    def of(cls, x):
        x = np.asarray(x, dtype=float)
        if len(x) == 0:
            return cls()
        mu = float(np.mean(x))
        c = x - mu
        return cls(len(x), mu, float(np.sum(c ** 2)), float(np.sum(c ** 3)), float(np.sum(c ** 4)))

    def merge(self, other):
        if self.n == 0:
            return Moments(**asdict(other))
        if other.n == 0:
            return Moments(**asdict(self))
        na, nb = self.n, other.n
        n = na + nb
        delta = other.mean - self.mean
        mean = self.mean + delta * nb / n
        m2 = self.m2 + other.m2 + delta ** 2 * na * nb / n
        m3 = (self.m3 + other.m3 + delta ** 3 * na * nb * (na - nb) / n ** 2
              + 3 * delta * (na * other.m2 - nb * self.m2) / n)
        m4 = (self.m4 + other.m4
              + delta ** 4 * na * nb * (na * na - na * nb + nb * nb) / n ** 3
              + 6 * delta ** 2 * (na * na * other.m2 + nb * nb * self.m2) / n ** 2
              + 4 * delta * (na * other.m3 - nb * self.m3) / n)
        return Moments(n, mean, m2, m3, m4)

    def summary(self):
        if self.n < 2:
            raise InputError("need at least two samples for moments")
        var = self.m2 / (self.n - 1)
        pop = self.m2 / self.n
        skew = (self.m3 / self.n) / pop ** 1.5 if pop > 0 else 0.0
        kurt = (self.m4 / self.n) / pop ** 2 - 3 if pop > 0 else 0.0
        return {"n": self.n, "mean": self.mean, "variance": var,
                "skewness": skew, "excess_kurtosis": kurt}


def summarize(samples):
    """Moments, KS, JB and a histogram on fixed edges [-5, 5] for one sample."""
    x = np.asarray(samples, dtype=float)
    out = Moments.of(x).summary()
    out["mean_se"] = math.sqrt(out["variance"] / len(x))
    out["ks"] = ks_normal(x) if len(x) >= 50 else None
    out["jb"] = jarque_bera(x) if len(x) >= 100 else None
    counts, _ = np.histogram(np.clip(x, HIST_EDGES[0], HIST_EDGES[-1]), HIST_EDGES)
    out["histogram"] = {"bin_left": HIST_EDGES[:-1].tolist(), "count": counts.tolist()}
    return out


# ---------------------------------------------------------------------------
# lemma checks

def gg1_analytic(H):
    a = constants.a_of(H)
    return 2 / a ** 2 * (1 / (2 * H - 1) - 1 / (2 * H))


def verify_lemma_gg1(H, N, quad_tol=1e-8):
    """N^(2H) sum_{i,j} of the four-fold block integral, against its limit.

    Rescaling each cell to [0, 1] turns the (i, j) term into N^(-4H) gg(i-j),
    so numeric = N^(-2H) sum_{|k|<N} (N - |k|) gg(k). Lags 0 and 1 carry the
    singular corners and use the graded rule; the others use a smooth tensor
    rule whose order is raised until successive values agree to quad_tol.
    """
    H = check_hurst(H)
    N = int(N)
    if not 1 <= N <= 128:
        raise DomainError("verify_lemma_gg1 needs 1 <= N <= 128")
    vals = {0: blocks.gg(0, H), 1: blocks.gg(1, H)}
    err = 0.0
    for k in range(2, N):
        prev = blocks.gg_smooth(k, H, 16)
        for n in (24, 32, 48):
            cur = blocks.gg_smooth(k, H, n)
            diff = abs(cur - prev)
            if diff <= quad_tol * abs(cur):
                break
            prev = cur
        err += 2 * (N - k) * diff
        vals[k] = cur
    total = N * vals[0] + sum(2 * (N - k) * vals[k] for k in range(1, N))
    numeric = N ** (-2 * H) * total
    analytic = gg1_analytic(H)
    return {"H": H, "N": N, "numeric": float(numeric), "analytic": float(analytic),
            "rel_err": float(abs(numeric - analytic) / analytic),
            "quad_err_estimate": float(N ** (-2 * H) * err)}


def c2_analytic(H):
    return H ** 2 * (2 * H - 1) / (H - 0.75)


def verify_lemma_c2(H, N):
    """N^2 sum_{|i-j|>=2} (2|D/N|^2H - |(D-1)/N|^2H - |(D+1)/N|^2H)^2 against its limit."""
    H = check_hurst(H)
    if not H > 0.75:
        raise DomainError(f"verify_lemma_c2 needs H > 3/4 (the N^2 scaling regime), got H={H}")
    N = int(N)
    D = np.arange(2, N, dtype=float)
    term = (2 * D ** (2 * H) - (D - 1) ** (2 * H) - (D + 1) ** (2 * H)) ** 2
    # the N^-2H factors pulled out of each bracket
    numeric = N ** (2 - 4 * H) * 2 * math.fsum((N - D) * term)
    analytic = c2_analytic(H)
    return {"H": H, "N": N, "numeric": float(numeric), "analytic": float(analytic),
            "rel_err": float(abs(numeric - analytic) / analytic)}


# ---------------------------------------------------------------------------
# experiments

@dataclass
class ExperimentConfig:
    experiment: str
    H: float
    N_grid: list
    replications: int = 1000
    master_seed: int = 0
    process: str | None = None
    generator: str | None = None
    inner_refine: int = 64
    inner: str = "matched"
    grid_cells: int = 200
    normalization: str = "chaos"
    batch: int = 25

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise DomainError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        self.H = check_hurst(self.H)
        self.N_grid = [int(n) for n in np.atleast_1d(self.N_grid)]
        if any(b <= a for a, b in zip(self.N_grid, self.N_grid[1:])):
            raise DomainError("N_grid must be strictly increasing")
        if min(self.N_grid) < 2:
            raise DomainError("every N must be at least 2")
        if self.replications < 100:
            raise DomainError("at least 100 replications are required")
        if self.process is None:
            self.process = ("fbm" if self.experiment.startswith("fbm") else "rosenblatt")
        if self.process not in ("fbm", "rosenblatt"):
            raise DomainError(f"unknown process {self.process!r}")
        needs = {"fbm_clt": (self.H < 0.75, "H < 3/4"),
                 "fbm_rosenblatt_limit": (self.H > 0.75, "H > 3/4"),
                 "fbm_log_regime": (abs(self.H - 0.75) < 1e-12, "H = 3/4")}
        ok, what = needs.get(self.experiment, (True, ""))
        if not ok:
            raise DomainError(f"{self.experiment} needs {what}, got H={self.H}")
        if self.experiment in ("rosen_l2_limit", "adjusted_normality") and self.process != "rosenblatt":
            raise DomainError(f"{self.experiment} runs on Rosenblatt paths")
        self.master_seed = int(self.master_seed)
        self.batch = max(1, int(self.batch))

    def to_dict(self):
        return asdict(self)


@dataclass
class McReport:
    config: dict
    results: list
    summary: dict = field(default_factory=dict)
    wall_time: float | None = None
    samples: dict | None = None

    def to_dict(self, timing=False):
        out = {"config": self.config, "results": self.results, "summary": self.summary}
        if timing:
            out["wall_time"] = self.wall_time
        return out


def _statistics_for(cfg, inc):
    """Per-replication statistics of one experiment as a dict of named arrays."""
    H, N = cfg.H, inc.shape[-1]
    if cfg.experiment == "fbm_clt":
        return {"stat": statistics.standardize(statistics.v_n_batch(inc, H), N, H, "fbm_lt34")}
    if cfg.experiment == "fbm_rosenblatt_limit":
        return {"stat": statistics.standardize(statistics.v_n_batch(inc, H), N, H, "fbm_gt34")}
    if cfg.experiment == "fbm_log_regime":
        return {"stat": statistics.standardize(statistics.v_n_batch(inc, H), N, H, "fbm_eq34")}
    if cfg.experiment == "rosen_l2_limit":
        scaled = statistics.standardize(statistics.v_n_batch(inc, H), N, H, "rosen")
        return {"stat": scaled - inc.sum(axis=-1)}
    if cfg.experiment == "adjusted_normality":
        diag = not H < statistics.ADJUSTED_HMAX
        return {"stat": statistics.adjusted_batch(inc, H, cfg.normalization, diag),
                "estimator": statistics.adjusted_estimator_batch(inc, H, cfg.normalization, diag)}
    if cfg.experiment == "estimator_rate":
        return {"stat": np.abs(statistics.hurst_batch(inc) - H)}
    raise DomainError(cfg.experiment)


def _simulate_block(cfg, N, streams):
    return simulate.batch_increments(cfg.process, cfg.H, N, streams, cfg.generator,
                                     cfg.inner_refine, cfg.grid_cells, cfg.inner)


def _extras(cfg, N, named):
    x = named["stat"]
    out = {}
    if cfg.experiment == "rosen_l2_limit":
        sq = x * x
        out["mean_square"] = float(np.mean(sq))
        out["mean_square_se"] = float(np.std(sq, ddof=1) / math.sqrt(len(sq)))
    if cfg.experiment == "estimator_rate":
        q = np.quantile(x, [0.5, 0.9, 0.95])
        out["abs_error"] = {"mean": float(np.mean(x)), "median": float(q[0]),
                            "q90": float(q[1]), "q95": float(q[2])}
        out["log_scaled_mean"] = float(math.log(N) * np.mean(x))
    if cfg.experiment == "adjusted_normality":
        out["estimator_form"] = summarize(named["estimator"])
    return out


def run(config, keep_samples=False):
    """Run one experiment; the result depends only on the config.

    keep_samples=True also returns the per-replication statistics as
    report.samples[N] (not part of the JSON form).
    """
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig(**config)
    t0 = time.perf_counter()
    R = cfg.replications
    results = []
    kept = {} if keep_samples else None
    for g, N in enumerate(cfg.N_grid):
        parts = {}
        for start in range(0, R, cfg.batch):
            idx = range(start, min(start + cfg.batch, R))
            streams = [simulate.SeedStream(cfg.master_seed, g * R + r) for r in idx]
            named = _statistics_for(cfg, _simulate_block(cfg, N, streams))
            for key, val in named.items():
                parts.setdefault(key, []).append(np.asarray(val, dtype=float))
        named = {k: np.concatenate(v) for k, v in parts.items()}
        entry = {"N": N, **summarize(named["stat"]), **_extras(cfg, N, named)}
        results.append(entry)
        if keep_samples:
            kept[N] = named
    summary = {}
    if cfg.experiment == "rosen_l2_limit":
        ms = [r["mean_square"] for r in results]
        summary["mean_square_curve"] = dict(zip(map(str, cfg.N_grid), ms))
        summary["final_over_initial"] = ms[-1] / ms[0]
        summary["nonincreasing_within_1se"] = all(
            b["mean_square"] <= a["mean_square"] + math.hypot(a["mean_square_se"], b["mean_square_se"])
            for a, b in zip(results, results[1:]))
    if cfg.experiment == "estimator_rate" and len(cfg.N_grid) >= 4:
        raw = {r["N"]: r["abs_error"]["mean"] for r in results}
        logged = {r["N"]: r["log_scaled_mean"] for r in results}
        summary["raw_slope"] = rate_regression(raw)
        summary["log_corrected_slope"] = rate_regression(logged)
    return McReport(cfg.to_dict(), results, summary, time.perf_counter() - t0, kept)
