import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import qmc

from hurstvar import constants as C
from hurstvar.errors import DomainError

H_GRID = np.linspace(0.505, 0.995, 50)
hs = st.floats(0.501, 0.999)


# --- derived parameters ---------------------------------------------------

def test_derive_examples():
    p = C.derive(0.75)
    assert p.Hprime == 0.875
    assert C.derive(0.6).aH == pytest.approx(0.48, abs=1e-15)
    mp.mp.dps = 30
    ref = mp.sqrt(2 * (2 * mp.mpf("0.75") - 1)) / (mp.mpf("1.75") * mp.sqrt(mp.mpf("0.75")))
    assert p.dH == pytest.approx(float(ref), rel=1e-15)
    assert round(p.dH, 5) == 0.65983


@pytest.mark.parametrize("H", [0.5, 0.4, 1.0, 1.2, float("nan")])
def test_derive_domain(H):
    with pytest.raises(DomainError):
        C.derive(H)


def test_domain_message():
    with pytest.raises(DomainError, match=r"H must lie in \(0.5, 1\), got 0.4"):
        C.derive(0.4)


@given(hs)
def test_a_two_ways(H):
    p = C.derive(H)
    assert p.aH == pytest.approx(p.Hprime * (2 * p.Hprime - 1), rel=1e-14)
    assert 0.75 < p.Hprime < 1


@pytest.mark.parametrize("H", H_GRID)
def test_normalization_identity(H):
    p = C.derive(H)
    assert abs(2 * p.dH ** 2 * p.aH ** 2 / (H * (2 * H - 1)) - 1) < 1e-12


@pytest.mark.parametrize("H", H_GRID)
def test_c3_two_forms(H):
    assert abs(C.c3_from_integral(H) / C.c3(H) - 1) < 1e-10


def test_normalization_diagnostic_reports_both():
    diag = C.normalization_diagnostic(0.6)
    assert diag["evaluated"] == pytest.approx(0.5, rel=1e-13)
    assert diag["stated_inline"] == 2.0
    assert diag["adopted"] == 0.5


def test_boundary_warning():
    assert C.boundary_warnings(0.5 + 1e-7)
    assert C.boundary_warnings(2 / 3 + 1e-8)
    assert not C.boundary_warnings(0.6)
    assert C.table(0.75 - 1e-7, chaos=False).meta["warnings"]


# --- rho ------------------------------------------------------------------

def test_rho_examples():
    assert C.rho(0.6, 0) == 1.0
    assert C.rho(0.5, 1) == 0.0
    mp.mp.dps = 30
    H, k = mp.mpf("0.7"), 10
    exact = float((abs(k + 1) ** (2 * H) + abs(k - 1) ** (2 * H) - 2 * k ** (2 * H)) / 2)
    assert C.rho(0.7, 10) == pytest.approx(exact, rel=1e-13)
    assert abs(exact - 0.070389) < 1e-6
    # leading term of the 1/k expansion is H(2H-1) k^(2H-2)
    lead = 0.7 * 0.4 * 10 ** -0.6
    assert abs(exact / lead - 1) < 0.01


@given(hs, st.integers(1, 10 ** 4))
def test_c1_term_is_four_rho_squared(H, k):
    with mp.workdps(60):
        Hm, km = mp.mpf(H), mp.mpf(k)
        r = ((km + 1) ** (2 * Hm) + (km - 1) ** (2 * Hm) - 2 * km ** (2 * Hm)) / 2
        term = (2 * km ** (2 * Hm) - (km - 1) ** (2 * Hm) - (km + 1) ** (2 * Hm)) ** 2
        assert abs(term - 4 * r ** 2) < mp.mpf(10) ** -40
    # float rho loses about k^(2H) eps to cancellation
    assert abs(C.rho(H, k) - float(r)) < 8e-16 * k ** (2 * H)


@given(hs, st.integers(0, 50))
def test_rho_symmetric_in_lag(H, k):
    assert C.rho(H, -k) == C.rho(H, k)


# --- c1 -------------------------------------------------------------------

def test_c1_reference_value():
    # Richardson extrapolation of raw partial sums, S_K = c1 - A K^(4H-3) - B K^(4H-4)
    H = 0.6
    Ks = [10 ** 4, 10 ** 5, 10 ** 6]
    S = C.c1_partial_sums(H, Ks)
    A = np.array([[1, K ** (4 * H - 3), K ** (4 * H - 4)] for K in Ks])
    ref = np.linalg.solve(A, S)[0]
    assert abs(C.c1(H) - ref) < 1e-9


def test_c1_near_half():
    assert abs(C.c1(0.5 + 1e-6) - 2) < 1e-9
    assert C.c1(0.51) < C.c1(0.55) < C.c1(0.6)


def test_c1_partial_sums_monotone_and_within_bound():
    H = 0.6
    ladder = [10, 100, 1000, 10 ** 4, 10 ** 5]
    sums = C.c1_partial_sums(H, ladder)
    assert all(b > a for a, b in zip(sums, sums[1:]))
    value, meta = C.c1_series(H)
    for K, s in zip(ladder, sums):
        bound = (2 * H * (2 * H - 1)) ** 2 * K ** (4 * H - 3) / (3 - 4 * H)
        assert 0 < value - s <= bound
    assert meta["tail_bound"] > meta["tail_estimate"] > 0
    assert meta["series_terms"] == 2000


def test_c1_stable_between_truncations():
    assert abs(C.c1(0.6, terms=10 ** 5) - C.c1(0.6, terms=10 ** 6)) < 1e-8


def test_c1_domain():
    with pytest.raises(DomainError):
        C.c1(0.75)
    with pytest.raises(DomainError):
        C.c1(0.8)


def test_c1_monotone_in_H():
    vals = [C.c1(H) for H in np.linspace(0.51, 0.74, 24)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


# --- closed-form family ---------------------------------------------------

def test_closed_forms():
    assert C.c1_prime() == 9 / 16
    assert C.c2(0.8) == pytest.approx(3.84, rel=1e-14)
    assert C.tau3(0.75) == pytest.approx(1.125, rel=1e-13)
    H = 0.8
    assert C.tau2(H) == pytest.approx(32 * C._da4(H) * (1 / (4 * H - 3) - 1 / (4 * H - 2)))
    assert C.e1(0.6) == pytest.approx(0.5 * C.c1(0.6) + C.tau1(0.6), rel=1e-14)
    assert C.e2(0.8) == pytest.approx(0.5 * C.c2(0.8) + C.tau2(0.8), rel=1e-14)
    assert C.e3() == pytest.approx(C.c3(0.75) + 1.125, rel=1e-13)


@given(hs)
def test_tau3_substitution(H):
    assert C.tau3(H) == pytest.approx(8 * H ** 2 * (2 * H - 1) ** 2, rel=1e-12)


def test_regime_domains():
    for f in (C.c2, C.tau2, C.e2):
        with pytest.raises(DomainError):
            f(0.7)
    for f in (C.tau1, C.e1):
        with pytest.raises(DomainError):
            f(0.8)


# --- F and f1 -------------------------------------------------------------

def test_F_zero():
    for H in (0.55, 0.6, 0.7, 0.8):
        assert abs(C.F(0.0, H)) < 1e-9


def test_F_derivative_at_zero():
    H = 0.6
    F0 = C.F(0.0, H)
    q = {h: (C.F(h, H) - F0) / h for h in (1e-2, 1e-3)}
    central = {h: (C.F(h, H) - C.F(-h, H)) / (2 * h) for h in (1e-2, 1e-3)}
    assert abs(q[1e-2]) < 1e-8 and abs(q[1e-3]) < 1e-10
    assert abs(q[1e-3]) < abs(q[1e-2])
    # F is even, so the central quotient vanishes identically
    assert all(abs(v) < 1e-10 for v in central.values())


@given(st.floats(0.05, 0.5))
def test_F_even(x):
    assert C.F(-x, 0.6) == pytest.approx(C.F(x, 0.6), abs=1e-12)


def test_F_routes_agree_at_half():
    x, H = 0.5, 0.6
    assert abs(C._F_tensor(x, H, 48) - C._F_blocks(x, H, 20)) < 1e-9


def test_F_domain():
    with pytest.raises(DomainError):
        C.F(1.5, 0.6)
    with pytest.raises(DomainError):
        C.F(0.5, 0.6, tol=0)


@pytest.mark.slow
def test_F_one_against_rqmc():
    H = 0.6
    a, al = C.a_of(H), H - 1

    def g(P, x):
        u, v, up, vp = P.T
        f = lambda t: np.abs(t * x + 1) ** al
        return f(u - up) * (a * a * (np.abs(u - v) * np.abs(up - vp)) ** al * f(v - vp)
                            - 2 * a * np.abs(u - v) ** al * f(v - up) + f(u - up))

    est = np.array([g(qmc.Sobol(4, scramble=True, seed=s).random_base2(17), 1.0).mean()
                    for s in range(8)])
    se = est.std(ddof=1) / math.sqrt(len(est))
    val = C.F(1.0, H)
    assert val > 0
    assert abs(val - est.mean()) < 4 * se


def test_F_one_stable_across_orders():
    H = 0.6
    vals = [C._F_blocks(1.0, H, q) for q in (12, 16, 20)]
    assert abs(vals[2] - vals[1]) < 1e-9
    assert abs(C.F(1.0, H) - 0.014334841848) < 1e-9


def test_f1_first_summand():
    H = 0.55
    p = C.derive(H)
    first = 32 * p.dH ** 4 * p.aH ** 2 * C.F(1.0, H)
    total, _ = C.f1_series(H, terms=1)
    assert first > 0
    # the K=1 series is the first summand plus the fitted tail
    _, meta = C.f1_series(H, terms=1)
    assert total - meta["tail_estimate"] == pytest.approx(first, rel=1e-9)


def test_f1_summands_nonnegative():
    H = 0.55
    assert all(C.F(1.0 / k, H, 1e-10) >= 0 for k in range(1, 41))


@pytest.mark.slow
def test_f1_stable_between_truncations():
    tol = 1e-9
    v200, m200 = C.f1_series(0.55, tol, 200)
    v400, _ = C.f1_series(0.55, tol, 400)
    assert abs(v200 - v400) < 2 * tol
    assert m200["tail_bound"] > 0


def test_f1_domain():
    with pytest.raises(DomainError):
        C.f1(2 / 3)
    with pytest.raises(DomainError):
        C.f1(0.7)


# --- chaos constants ------------------------------------------------------

@pytest.mark.slow
def test_chaos_constants_at_06():
    H = 0.6
    e1c, f1c = C.e1_chaos(H), C.f1_chaos(H)
    assert e1c >= C.c1(H)
    assert e1c == pytest.approx(3.6194, abs=2e-4)
    p = C.derive(H)
    assert f1c == pytest.approx(32 * p.dH ** 4 * p.aH ** 2 * C.diagonal_block(H) + 2 * C.f1(H),
                                rel=1e-8)
    # the finite-N variance approaches the limit from below
    v512 = C.adjusted_variance(H, 512, "finite")
    v2048 = C.adjusted_variance(H, 2048, "finite")
    lim = C.adjusted_variance(H)
    assert v512 < v2048 < lim
    assert lim - v2048 < 0.5 * (lim - v512)


def test_adjusted_variance_kinds():
    with pytest.raises(DomainError):
        C.adjusted_variance(0.6, kind="other")
    with pytest.raises(DomainError):
        C.adjusted_variance(0.6, None, "finite")


@pytest.mark.slow
def test_finite_variance_matches_simulation():
    # adjusted statistic at N=64 from simulated Rosenblatt paths, scaled by
    # the exact finite-N variance, should have unit variance
    from hurstvar import simulate, statistics
    from hurstvar.simulate import SeedStream
    H, N, R = 0.6, 64, 4000
    inc = simulate.batch_increments("rosenblatt", H, N, [SeedStream(5, r) for r in range(R)],
                                    inner_refine=128)
    x = statistics.adjusted_batch(inc, H, normalization="finite")
    se = math.sqrt(np.var(x) * (np.mean((x - x.mean()) ** 4) / np.var(x) ** 2 - 1) / R)
    assert abs(np.var(x) - 1) < 4 * se


def test_rosenblatt_cumulants():
    var, skew, kurt = C.rosenblatt_cumulants(0.6)
    assert var == 1.0
    assert skew == pytest.approx(1.183, abs=2e-3)
    assert kurt == pytest.approx(3.39, abs=1e-2)


# --- table ----------------------------------------------------------------

def test_table_gating():
    t = C.table(0.6, chaos=False)
    assert t.c1 and t.e1 and t.tau1 and t.f1 and t.c3
    assert t.c2 is None and t.tau2 is None and t.e2 is None and t.c1_prime is None
    t = C.table(0.7, chaos=False)
    assert t.f1 is None and t.c1 is not None
    t = C.table(0.8, chaos=False)
    assert t.c1 is None and t.c2 == pytest.approx(3.84) and t.tau2 > 0
    t = C.table(0.75, chaos=False)
    assert t.c1_prime == 0.5625 and t.tau3 == pytest.approx(1.125) and t.c1 is None


@pytest.mark.parametrize("H", [0.55, 0.6, 0.7, 0.75, 0.8, 0.9])
def test_table_entries_positive(H):
    d = C.table(H, chaos=False).to_dict()
    for key, val in d.items():
        if key not in ("H", "meta") and val is not None:
            assert val > 0, key
    assert "quad_tol" in d["meta"]
