import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from hurstvar import constants, simulate, statistics as S
from hurstvar.errors import DegenerateInputError, DomainError
from hurstvar.simulate import SeedStream

increments = arrays(np.float64, st.integers(2, 300),
                    elements=st.floats(-1e3, 1e3, allow_subnormal=False)).filter(
    lambda a: np.sum(a * a) > 1e-200)
hs = st.floats(0.501, 0.999)


def path_from(inc):
    return np.concatenate([[0.0], np.cumsum(inc)])


# --- exact identities -----------------------------------------------------

@given(increments, hs)
def test_identities(inc, H):
    N = len(inc)
    s = S.s_n_batch(inc)
    v = S.v_n_batch(inc, H)
    h = S.hurst_batch(inc)
    assert 1 + v == pytest.approx(s * N ** (2 * H), rel=1e-12)
    assert h == pytest.approx(-math.log(s) / (2 * math.log(N)), rel=1e-12, abs=1e-15)
    assert math.log(s) + 2 * H * math.log(N) == pytest.approx(
        -2 * (h - H) * math.log(N), rel=1e-12, abs=1e-12)


def test_path_and_batch_forms_agree():
    p = simulate.fbm_path(0.7, 128, 4)
    assert S.s_n(p) == S.s_n_batch(p.increments)
    assert S.v_n(p, 0.7) == S.v_n_batch(p.increments, 0.7)
    assert S.hurst_estimate(p) == S.hurst_batch(p.increments)
    # a bare array of path values works as well
    assert S.s_n(p.values) == S.s_n(p)


def test_linear_path():
    N = 64
    x = np.arange(N + 1) / N
    # (1/N) sum of N terms N^-2; a smooth path has H_hat = 1
    assert S.s_n(x) == pytest.approx(N ** -2.0, rel=1e-12)
    assert S.hurst_estimate(x) == pytest.approx(1.0, rel=1e-12)


def test_constant_path_is_degenerate():
    with pytest.raises(DegenerateInputError):
        S.s_n(np.ones(10))
    with pytest.raises(DegenerateInputError):
        S.hurst_estimate(np.zeros(10))


def test_short_path_rejected():
    with pytest.raises(DomainError):
        S.s_n(np.array([0.0, 1.0]))


def test_exact_centering():
    N, H = 100, 0.6
    signs = np.where(np.arange(N) % 3, 1.0, -1.0)
    x = path_from(signs * N ** -H)
    assert abs(S.v_n(x, H)) < 1e-13


@given(st.floats(0.01, 100.0))
def test_scaling(c):
    p = simulate.fbm_path(0.6, 256, 8)
    lhs = S.hurst_estimate(c * p.values)
    assert lhs == pytest.approx(S.hurst_estimate(p) - math.log(c) / math.log(256), abs=1e-12)


@given(st.floats(-50, 50))
def test_translation_invariant(c):
    p = simulate.fbm_path(0.6, 64, 1)
    assert S.hurst_estimate(p.values + c) == pytest.approx(S.hurst_estimate(p), abs=1e-12)


# --- standardization ------------------------------------------------------

def test_standardize_rosen_is_4d():
    H, N, V = 0.6, 1024, 0.013
    assert S.standardize(V, N, H, "rosen") == pytest.approx(
        N ** (1 - H) * V / (4 * constants.d_of(H)), rel=1e-14)


def test_standardize_forms():
    V = np.array([0.01, -0.02])
    out = S.standardize(V, 1024, 0.6, "fbm_lt34")
    assert np.allclose(out, math.sqrt(1024 / constants.c1(0.6)) * V)
    out = S.standardize(0.01, 1024, 0.75, "fbm_eq34")
    assert out == pytest.approx(math.sqrt(1024 / (9 / 16 * math.log(1024))) * 0.01)
    out = S.standardize(0.01, 1024, 0.8, "fbm_gt34")
    assert out == pytest.approx(math.sqrt(1024 ** 0.8 / 3.84) * 0.01)
    assert isinstance(S.standardize(0.01, 1024, 0.6, "rosen"), float)


@pytest.mark.parametrize("H, regime", [(0.8, "fbm_lt34"), (0.7, "fbm_eq34"),
                                       (0.7, "fbm_gt34"), (0.6, "levy")])
def test_standardize_regime_mismatch(H, regime):
    with pytest.raises(DomainError):
        S.standardize(0.1, 100, H, regime)


# --- adjusted statistic ---------------------------------------------------

def _cancelling_path(H, N):
    # equal increments delta with N^(2H) delta^2 - 1 = 4 d N^(H-1) N delta;
    # with y = N^H delta this is y^2 - 4 d y - 1 = 0
    d = constants.d_of(H)
    y = 2 * d + math.sqrt(4 * d * d + 1)
    return path_from(np.full(N, y * N ** -H))


def test_adjusted_exact_cancellation():
    H, N = 0.6, 256
    x = _cancelling_path(H, N)
    V = S.v_n(x, H)
    assert V == pytest.approx(4 * constants.d_of(H) * N ** (H - 1) * x[-1], rel=1e-12)
    assert abs(S.adjusted_statistic(x, H)) < 1e-10
    assert abs(S.adjusted_statistic(x, H, normalization="printed")) < 1e-10


def test_adjusted_estimator_relation():
    H, N = 0.6, 512
    p = simulate.rosenblatt_path_nclt(H, N, 16, seed=2)
    V = S.v_n(p, H)
    z1 = p.values[-1]
    scale = math.sqrt(N / constants.adjusted_variance(H))
    est = S.adjusted_estimator_statistic(p, H)
    assert est == pytest.approx(scale * (math.log1p(V) - 4 * constants.d_of(H) * N ** (H - 1) * z1),
                                rel=1e-10)
    adj = S.adjusted_statistic(p, H)
    assert adj == pytest.approx(scale * (V - 4 * constants.d_of(H) * N ** (H - 1) * z1), rel=1e-12)


def test_adjusted_normalizations():
    p = simulate.rosenblatt_path_nclt(0.6, 256, 16, seed=3)
    chaos = S.adjusted_statistic(p, 0.6)
    printed = S.adjusted_statistic(p, 0.6, normalization="printed")
    ratio = math.sqrt(constants.adjusted_variance(0.6) / constants.adjusted_variance(0.6, kind="printed"))
    assert printed == pytest.approx(chaos * ratio, rel=1e-9)


def test_adjusted_domain():
    p = simulate.rosenblatt_path_nclt(0.7, 64, 8, seed=1)
    with pytest.raises(DomainError):
        S.adjusted_statistic(p, 0.7)
    with pytest.raises(DomainError):
        S.adjusted_estimator_statistic(p, 2 / 3)
    assert math.isfinite(S.adjusted_statistic(p, 0.7, diagnostic=True))
    assert math.isfinite(S.adjusted_statistic(p, 0.7, normalization="printed", diagnostic=True))


# --- bundle ---------------------------------------------------------------

def test_bundle_fields():
    p = simulate.rosenblatt_path_nclt(0.6, 256, 16, seed=5)
    b = S.compute_bundle(p, H_ref=0.6, adjusted=True)
    assert b.N == 256 and not b.plug_in and b.normalization == "chaos"
    assert set(b.standardized) == {"fbm_lt34", "rosen"}
    assert b.adjusted_stat == S.adjusted_statistic(p, 0.6)
    assert 1 + b.V_N == pytest.approx(b.S_N * 256 ** 1.2, rel=1e-13)
    assert S.compute_bundle(p).V_N is None
    assert set(S.compute_bundle(p, H_ref=0.8).standardized) == {"fbm_gt34", "rosen"}
    assert set(S.compute_bundle(p, H_ref=0.75).standardized) == {"fbm_eq34", "rosen"}


def test_bundle_plug_in_is_flagged():
    p = simulate.fbm_path(0.7, 512, 6)
    b = S.compute_bundle(p, plug_in=True)
    assert b.plug_in and b.H_ref == b.H_hat
    assert abs(b.V_N) < 1e-12
    with pytest.raises(DomainError):
        S.compute_bundle(p, H_ref=0.7, plug_in=True)
    with pytest.raises(DomainError):
        S.compute_bundle(p, adjusted=True)
    assert b.to_dict()["plug_in"] is True


# --- Monte-Carlo properties -----------------------------------------------

def test_mean_of_s_n():
    H, N, R = 0.6, 512, 2000
    inc = simulate.batch_increments("fbm", H, N, [SeedStream(40, r) for r in range(R)])
    s = S.s_n_batch(inc)
    assert abs(s.mean() - N ** (-2 * H)) < 3 * s.std() / math.sqrt(R)


def test_fbm_clt_variance():
    H, N, R = 0.6, 1024, 1000
    inc = simulate.batch_increments("fbm", H, N, [SeedStream(41, r) for r in range(R)])
    z = S.standardize(S.v_n_batch(inc, H), N, H, "fbm_lt34")
    assert abs(np.var(z) - 1) < 0.15


def test_v_n_shrinks_for_rosenblatt():
    H, R = 0.6, 200
    med = []
    for N in (64, 256, 1024):
        inc = simulate.batch_increments("rosenblatt", H, N, [SeedStream(42, r) for r in range(R)],
                                        inner_refine=32)
        med.append(np.median(np.abs(S.v_n_batch(inc, H))))
    assert med[0] > med[1] > med[2]


@pytest.mark.slow
def test_rosenblatt_consistency():
    H, N, R = 0.7, 4096, 500
    inc = simulate.batch_increments("rosenblatt", H, N, [SeedStream(43, r) for r in range(R)],
                                    inner_refine=64)
    err = np.abs(S.hurst_batch(inc) - H)
    assert np.mean(err < 0.05) >= 0.95


@pytest.mark.slow
def test_estimator_l2_limit():
    # N^(1-H) log N (H - H_hat) / (2d) -> Z(1) in mean square. With the
    # opposite sign the limit is -Z(1), and the mean square tends to 4.
    H, R = 0.6, 500
    d = constants.d_of(H)
    ms, ms_flipped = [], []
    for N in (64, 256, 1024):
        inc = simulate.batch_increments("rosenblatt", H, N, [SeedStream(44, r) for r in range(R)],
                                        inner_refine=64)
        z1 = inc.sum(axis=1)
        lhs = N ** (1 - H) * math.log(N) * (H - S.hurst_batch(inc)) / (2 * d)
        ms.append(np.mean((lhs - z1) ** 2))
        ms_flipped.append(np.mean((-lhs - z1) ** 2))
    assert ms[0] > ms[1] > ms[2]
    assert all(3 < m < 5 for m in ms_flipped)


@pytest.mark.slow
def test_adjusted_normality_at_055():
    from hurstvar.montecarlo import jarque_bera, ks_normal
    H, N, R = 0.55, 1024, 1000
    inc = simulate.batch_increments("rosenblatt", H, N, [SeedStream(45, r) for r in range(R)],
                                    inner_refine=128)
    x = S.adjusted_batch(inc, H)
    assert ks_normal(x)["p"] > 0.01
    assert jarque_bera(x)["p"] > 0.01
