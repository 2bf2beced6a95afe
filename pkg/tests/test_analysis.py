import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from wcfs import Exponential, ModelSpec, hyperexp, moments, multiserver_jobs, simulate, threshold_jobs
from wcfs import analysis as A
from wcfs.errors import InfiniteRemSup, NonWcfs, UnstableConfig
from wcfs.distributions import Moments, Pareto

HX = hyperexp((0.5, 2.0), (0.5, 2.0 / 3.0))
MSJ = multiserver_jobs(4, [(0.5, 1, Exponential(0.5)), (0.5, 4, Exponential(2.0 / 3.0))])
TP = threshold_jobs([(0.5, 1, Exponential(2.0)), (0.5, 4, Exponential(2.0 / 3.0))])
HET = ModelSpec("het_mgk_fcfs", HX, server_speeds=(0.4, 0.3, 0.2, 0.1))
LPS = ModelSpec("lps", HX, mpl=4)
MG1 = ModelSpec("het_mgk_fcfs", HX, k=1)


def test_pk_examples():
    m = moments(HX)
    assert A.pk_queueing_time(0.8, m) == pytest.approx(5.0, rel=1e-12)
    assert A.pk_queueing_time(0.96, m) == pytest.approx(30.0, rel=1e-12)
    assert A.pk_queueing_time(0.0, m) == 0.0
    with pytest.raises(UnstableConfig):
        A.pk_queueing_time(1.0, m)


@given(st.floats(0.0, 0.99))
def test_pk_equals_baseline_form(rho):
    m = moments(HX)
    expected = rho / (1 - rho) * m.second_moment / (2 * m.mean)
    assert A.pk_queueing_time(rho, m) == pytest.approx(expected, rel=1e-12, abs=1e-300)


@given(st.floats(0.01, 0.99), st.floats(0.5, 4.0))
def test_pk_exponential_is_mm1_minus_mean(rho, mu):
    lam = rho * mu
    m = Exponential(mu).moments()
    assert A.pk_queueing_time(lam, m) == pytest.approx(A.mmk_oracle(1, lam, mu) - 1 / mu, rel=1e-12)


def test_band_examples():
    mg1 = A.band_constants(MG1)
    assert mg1 == pytest.approx((1.0, 1.0), rel=1e-12)
    assert A.band_constants(HET) == pytest.approx((-3.5, 44.5), rel=1e-12)
    assert A.band_constants(LPS) == pytest.approx((-3.5, 8.5), rel=1e-12)
    band = A.theorem2_band(HET, 0.8)
    assert band.lower == pytest.approx(5.0 - 3.5)
    assert band.upper == pytest.approx(5.0 + 44.5)
    assert band.contains(10.0)
    assert not band.contains(60.0)
    assert band.contains(50.0, slack=1.0)


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_band_constants_do_not_depend_on_load(r1, r2):
    a, b = A.theorem2_band(HET, r1), A.theorem2_band(HET, r2)
    assert (a.c_lower, a.c_upper) == (b.c_lower, b.c_upper)


def test_band_errors():
    with pytest.raises(NonWcfs):
        A.theorem2_band(ModelSpec("msj_fcfs", MSJ, k=4), 0.5)
    with pytest.raises(InfiniteRemSup):
        A.band_constants(ModelSpec("het_mgk_fcfs", Pareto(3.0), k=2))
    with pytest.raises(ValueError):
        A.BoundBand(1.0, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        A.BoundBand(0.5, 0.0, 2.0, 1.0)


def test_scaled_band_and_gap_bound():
    band = A.theorem2_band(HET, 0.96)
    lo, hi = A.scaled_band(band, 1.25)
    assert lo == pytest.approx(0.96 * 1.25 - 0.04 * 3.5)
    assert hi == pytest.approx(0.96 * 1.25 + 0.04 * 44.5)
    assert A.heavy_traffic_gap_bound(band) == pytest.approx(44.5 * 0.04)
    # The scaled band is the band times 1 - rho.
    assert lo == pytest.approx(band.lower * 0.04)
    assert hi == pytest.approx(band.upper * 0.04)


def _erlang_c_sum(k, a):
    # Textbook form with explicit factorial sums.
    top = a**k / math.factorial(k) * k / (k - a)
    return top / (sum(a**i / math.factorial(i) for i in range(k)) + top)


@given(st.integers(1, 30), st.floats(0.01, 0.99))
def test_erlang_c_matches_sum_formula(k, util):
    a = util * k
    assert A.erlang_c(k, a) == pytest.approx(_erlang_c_sum(k, a), rel=1e-9)


def test_mmk_examples():
    assert A.mmk_oracle(1, 0.5, 1.0) == pytest.approx(2.0, rel=1e-12)
    # k=2, servers of speed 1/2: per-server rate 1/2, offered load 1, C = 1/3.
    assert A.erlang_c(2, 1.0) == pytest.approx(1 / 3, rel=1e-12)
    assert A.mmk_oracle(2, 0.5, 1.0) == pytest.approx((1 / 3) / 0.5 + 2.0, rel=1e-12)
    assert A.mmk_oracle(5, 1e-9, 1.0) == pytest.approx(5.0, rel=1e-6)
    with pytest.raises(UnstableConfig):
        A.mmk_oracle(3, 1.0, 1.0)
    with pytest.raises(ValueError):
        A.mmk_oracle(0, 0.5, 1.0)


def test_mm1_response():
    assert A.mm1_response(0.8, 1.0) == pytest.approx(5.0)
    with pytest.raises(UnstableConfig):
        A.mm1_response(1.0, 1.0)


def test_work_queueing_and_front_bands():
    assert A.front_time_band(HET) == pytest.approx((1.0, 40.0))
    assert A.queueing_band(HET, 10.0) == pytest.approx((5.5, 10.0))
    assert A.work_band(HET, 0.8) == pytest.approx((5.0, 9.5))


def test_mg1_delta_is_mean_size():
    m = simulate(MG1, 0.5, 400_000, 17)
    d = A.delta_pi(m, 0.5, moments(HX))
    assert d.ci == m.ci_T
    assert abs(d.value - 1.0) <= A.SIGMAS * d.ci


def test_low_load_delta_tends_to_mean_size():
    m = simulate(LPS, 1e-4, 20_000, 3)
    assert A.delta_pi(m, 1e-4, moments(HX)).value == pytest.approx(1.0, abs=0.05)


def test_lps_exponential_matches_mm1():
    model = ModelSpec("lps", Exponential(1.0), mpl=4)
    m = simulate(model, 0.7, 400_000, 5)
    assert abs(m.mean_T - A.mm1_response(0.7, 1.0)) <= A.SIGMAS * m.ci_T


def test_scaled_response_example():
    m = simulate(MG1, 0.96, 2_000_000, 12)
    assert abs(A.scaled_response(m, 0.96) - 1.24) <= A.SIGMAS * m.ci_T * 0.04


@pytest.mark.parametrize("model", [HET, LPS, ModelSpec("threshold_fcfs", TP, k=4),
                                   ModelSpec("msj_serverfilling", MSJ, k=4)],
                         ids=lambda m: m.policy)
def test_scaled_response_gap_shrinks_with_load(model):
    for rho in (0.5, 0.8, 0.9):
        m = simulate(model, rho, 100_000, 40 + int(rho * 10))
        band = A.theorem2_band(model, rho)
        gap = abs(A.scaled_response(m, rho) - 1.25)
        assert gap <= A.heavy_traffic_gap_bound(band) + A.SIGMAS * m.ci_T * (1 - rho)


def test_self_consistency_names():
    m = simulate(HET, 0.6, 50_000, 9)
    names = [c.name for c in A.self_consistency(HET, m, include_work=True)]
    assert names == ["little_law", "busy_fraction", "front_time_band", "queueing_band", "work_band"]
    non = ModelSpec("msj_fcfs", MSJ, k=4)
    names = [c.name for c in A.self_consistency(non, simulate(non, 0.5, 20_000, 9))]
    assert names == ["little_law", "busy_fraction"]


def test_self_consistency_catches_bad_metrics():
    m = simulate(HET, 0.6, 50_000, 9)
    broken = m.__class__(**{**m.as_dict(), "mean_N": m.mean_N * 1.5, "busy_fraction": 0.9,
                            "mean_T_F": 100.0})
    checks = {c.name: c.ok for c in A.self_consistency(HET, broken)}
    assert not checks["little_law"]
    assert not checks["busy_fraction"]
    assert not checks["front_time_band"]


def test_moments_passthrough():
    assert A.pk_queueing_time(0.5, Moments(1.0, 2.0)) == pytest.approx(1.0)
