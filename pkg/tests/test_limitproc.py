import math

import numpy as np
import pytest

from urnlimits import dist, limitproc as lp
from urnlimits.rng import stream
from urnlimits.stats import EmpiricalLaw, tv_distance


def test_polya_det_limit_examples():
    assert lp.polya_det_limit(1, 1, 1, 1) == 1.5
    assert lp.polya_det_limit(2, 3, 1, 0) == 2
    t = np.linspace(0.1, 2, 20)
    h = 1e-5
    a, b, k = 1.3, 0.7, 2
    d = (lp.polya_det_limit(a, b, k, t + h) - lp.polya_det_limit(a, b, k, t - h)) / (2 * h)
    np.testing.assert_allclose(d, k * lp.polya_det_limit(a, b, k, t) / (a + b + k * t), atol=1e-8)


@pytest.mark.parametrize("c", [2.0, 0.4])
def test_qpolya_det_limit_ode(c):
    a, b, k = 1.0, 1.5, 1
    assert lp.qpolya_det_limit(a, b, k, c, 0.0) == pytest.approx(a, abs=1e-14)
    t = np.linspace(0.05, 2, 40)
    h = 1e-5
    x = lp.qpolya_det_limit(a, b, k, c, t)
    d = (lp.qpolya_det_limit(a, b, k, c, t + h) - lp.qpolya_det_limit(a, b, k, c, t - h)) / (2 * h)
    np.testing.assert_allclose(d, k * (1 - c**x) / (1 - c ** (a + b + k * t)), atol=1e-7)


def test_qpolya_det_limit_reduces_to_polya():
    t = np.linspace(0, 2, 9)
    np.testing.assert_allclose(lp.qpolya_det_limit(1, 2, 1, 1 + 1e-7, t), lp.polya_det_limit(1, 2, 1, t), atol=1e-5)
    with pytest.raises(ValueError):
        lp.qpolya_det_limit(0, 0, 1, 2.0, 1.0)


def test_multicolor_det_limit():
    a, k, c = [1.0, 2.0, 0.5], 1, 0.6
    np.testing.assert_allclose(lp.multicolor_det_limit(a, k, c, 0.0), a, atol=1e-14)
    for t in (0.3, 1.0, 2.0):
        x = lp.multicolor_det_limit(a, k, c, t)
        assert x.sum() == pytest.approx(sum(a) + k * t, abs=1e-10)
        h = 1e-5
        d = (lp.multicolor_det_limit(a, k, c, t + h) - lp.multicolor_det_limit(a, k, c, t - h)) / (2 * h)
        np.testing.assert_allclose(d, lp.multicolor_ode_rhs(x, a, k, c, t), atol=1e-6)
    x2 = lp.multicolor_det_limit(a, k, c, 1.0, regime=2)
    np.testing.assert_allclose(x2, np.array(a) * (1 + k / sum(a)), rtol=1e-14)
    with pytest.raises(ValueError):
        lp.multicolor_det_limit(a, k, 2.0, 1.0)


def test_multicolor_ode_rhs_matches_system():
    # X'_i = k c^{sigma+kt - sum_{j>=i} X_j} (1 - c^{X_i}) / (1 - c^{sigma+kt})
    a, k, c, t = [1.0, 1.0, 1.0], 1, 0.5, 0.7
    x = lp.multicolor_det_limit(a, k, c, t)
    tot = sum(a) + k * t
    tail = np.cumsum(x[::-1])[::-1]
    expect = k * c ** (tot - tail) * (1 - c**x) / (1 - c**tot)
    np.testing.assert_allclose(lp.multicolor_ode_rhs(x, a, k, c, t), expect, rtol=1e-12)


# ---------------------------------------------------------------- birth / Poisson


def test_birth_grid_sampler():
    spec = lp.BirthRateSpec("polya", 1, 1, 1.0)
    z = lp.birth_sample_grid(spec, [0, 0.5, 1.0], 100_000, stream(1))
    assert np.all(z[:, 0] == 0)
    assert tv_distance(EmpiricalLaw.from_samples(z[:, 2]), dist.NegativeBinomial(1, 0.5).to_pmf()) < 0.005


@pytest.mark.parametrize(
    "spec",
    [
        lp.BirthRateSpec("polya", 1, 1, 1.0),
        lp.BirthRateSpec("polya", 2, 3, 0.5),
        lp.BirthRateSpec("q-polya", 1, 1, 1.0, 2.0),
    ],
)
def test_event_and_grid_samplers_agree(spec):
    n = 100_000
    grid = lp.birth_sample_grid(spec, [0, 1.0], n, stream(2))[:, 1]
    rng = stream(3)
    events = np.array([lp.count_at(lp.birth_sample_events(spec, 1.0, rng), [1.0])[0] for _ in range(n)])
    assert tv_distance(EmpiricalLaw.from_samples(grid), EmpiricalLaw.from_samples(events)) < 0.01


def test_first_jump_survival():
    spec = lp.BirthRateSpec("polya", 1, 1, 1.0)
    rng = stream(4)
    first = np.array([spec.next_jump(0.0, 0, e) for e in rng.standard_exponential(100_000)])
    for t in (0.5, 1.0, 3.0):
        assert np.mean(first > t) == pytest.approx(1 / (1 + t), abs=0.005)


def test_q_rate_values():
    spec = lp.BirthRateSpec("q-polya", 2, 1, 1.5, 3.0)
    assert spec.rate(0.0, 0) == pytest.approx(2 * math.log(3) / (3**1.5 - 1), rel=1e-14)
    assert lp.qpolya_rate(2.0, 1 + 1e-8) == pytest.approx(0.5, abs=1e-6)


def test_birth_spec_rejects():
    with pytest.raises(ValueError):
        lp.BirthRateSpec("polya", 1, 1, 0.0)
    with pytest.raises(ValueError):
        lp.BirthRateSpec("q-polya", 1, 1, 1.0, 0.5)
    with pytest.raises(ValueError):
        lp.BirthRateSpec("other", 1)


def test_chapman_kolmogorov_exact():
    # one NB draw over [0, t2] equals the composition over [0, t1], [t1, t2]
    spec = lp.BirthRateSpec("q-polya", 1, 2, 1.0, 2.0)
    t1, t2, top = 0.4, 1.3, 60
    direct = spec.increment_law(0, t2, 0).pmf(np.arange(top))
    first = spec.increment_law(0, t1, 0).pmf(np.arange(top))
    composed = np.zeros(top)
    for j in range(top):
        second = spec.increment_law(t1, t2, j).pmf(np.arange(top - j))
        composed[j:] += first[j] * second
    np.testing.assert_allclose(composed[:30], direct[:30], atol=1e-12)


def test_chapman_kolmogorov_sampled():
    spec = lp.BirthRateSpec("polya", 1, 1, 1.0)
    rng = stream(6)
    two_step = lp.birth_sample_grid(spec, [0, 0.4, 1.3], 100_000, rng)[:, 2]
    one_step = lp.birth_sample_grid(spec, [0, 1.3], 100_000, rng)[:, 1]
    assert tv_distance(EmpiricalLaw.from_samples(two_step), EmpiricalLaw.from_samples(one_step)) < 0.01


def test_poisson_sampler():
    # TV noise at N=1e5 is about 0.0028 +- 0.0008, so 0.005 is a ~3 sigma band
    rng = stream(17)
    counts = np.array([len(lp.poisson_sample(2.0, 1.0, rng)) for _ in range(100_000)])
    assert counts.mean() == pytest.approx(2.0, abs=4 * math.sqrt(2 / 100_000))
    assert tv_distance(EmpiricalLaw.from_samples(counts), dist.Poisson(2.0).to_pmf()) < 0.005
    with pytest.raises(ValueError):
        lp.poisson_sample(0.0, 1.0, rng)


# ---------------------------------------------------------------- SDEs


def test_em_deterministic_integration():
    spec = lp.SdeSpec(lambda t: 0 * t, lambda t: 1 + 0 * t, lambda t: 0 * t, 0.0)
    path = lp.euler_maruyama(spec, 1e-3, np.zeros(1000))
    assert path.values[-1] == pytest.approx(1.0, abs=1e-9)


def test_polya_drift_fixed_point():
    spec = lp.polya_fluct_spec(1, 2, 1, 0.0, 0.0)
    assert spec.drift(0.7, 0.0) == 0.0


def test_linear_solution_deterministic():
    spec = lp.SdeSpec(lambda t: np.sin(t), lambda t: 0 * t, lambda t: 0 * t, 2.0)
    path = lp.linear_sde_solution(spec, 1e-3, np.zeros(1000))
    assert path.values[-1] == pytest.approx(2 * math.exp(1 - math.cos(1)), rel=1e-10)


def test_linear_solution_reproduces_polya_closed_form():
    a, b, k, th1, th2 = 1.0, 2.0, 1, 0.3, -0.4
    dw = lp.brownian_increments(2000, 1e-3, stream(8))
    gen = lp.linear_sde_solution(lp.polya_fluct_spec(a, b, k, th1, th2), 1e-3, dw).values
    closed = lp.polya_fluct_solution(a, b, k, th1, th2, 1e-3, dw).values
    np.testing.assert_allclose(gen, closed, atol=1e-10)


def test_q_closed_form_matches_generic_solution():
    dw = lp.brownian_increments(2000, 1e-3, stream(9))
    gen = lp.qpolya_fluct_solution(1, 1, 1, 2.0, 0.2, 0.1, 1e-3, dw).values
    direct = lp.qpolya_fluct_closed_form(1, 1, 1, 2.0, 0.2, 0.1, 1e-3, dw).values
    np.testing.assert_allclose(gen, direct, atol=1e-10)


def test_fluct_initial_values_and_degenerate_diffusion():
    dw = lp.brownian_increments(100, 1e-2, stream(10))
    assert lp.polya_fluct_solution(1, 1, 1, 0.7, 0, 1e-2, dw).values[0] == 0.7
    assert lp.qpolya_fluct_solution(1, 1, 1, 2.0, 0.7, 0, 1e-2, dw).values[0] == pytest.approx(0.7, abs=1e-14)
    p1 = lp.polya_fluct_solution(0, 1, 1, 0.3, 0.5, 1e-2, dw).values
    p2 = lp.polya_fluct_solution(0, 1, 1, 0.3, 0.5, 1e-2, -dw).values
    np.testing.assert_array_equal(p1, p2)


def test_q_fluct_reduces_to_polya():
    dw = lp.brownian_increments(1000, 1e-3, stream(11))
    q = lp.qpolya_fluct_solution(1, 1, 1, 1 + 1e-6, 0.1, 0.2, 1e-3, dw).values
    p = lp.polya_fluct_solution(1, 1, 1, 0.1, 0.2, 1e-3, dw).values
    np.testing.assert_allclose(q, p, atol=1e-4)


def test_polya_variance_isometry():
    mean, var = lp.polya_fluct_moments(1, 1, 1, 0, 0, 1.0)
    assert var == pytest.approx(0.375, rel=1e-15)
    m2, v2 = lp.linear_sde_moments(lp.polya_fluct_spec(1, 1, 1), 1.0)
    assert v2 == pytest.approx(0.375, rel=1e-10) and m2 == pytest.approx(0.0, abs=1e-14)
    dw = lp.brownian_increments(200, 5e-3, stream(12), size=100_000)
    y = lp.polya_fluct_solution(1, 1, 1, 0, 0, 5e-3, dw).values[:, -1]
    assert y.var() == pytest.approx(0.375, rel=0.01 + 4 * math.sqrt(2 / 100_000))


def test_q_moments_quadrature_and_c_to_one():
    _, v = lp.linear_sde_moments(lp.qpolya_fluct_spec(1, 1, 1, 2.0), 1.0)
    assert v == pytest.approx(0.2693030743, rel=1e-8)
    _, v1 = lp.linear_sde_moments(lp.qpolya_fluct_spec(1, 1, 1, 1 + 1e-8), 1.0)
    assert v1 == pytest.approx(0.375, rel=1e-6)


def test_em_coupling_refinement():
    rng = stream(13)
    for spec_of in (lambda: lp.polya_fluct_spec(1, 1, 1), lambda: lp.qpolya_fluct_spec(1, 1, 1, 2.0)):
        spec = spec_of()
        fine = lp.brownian_increments(4000, 2.5e-4, rng, size=20)
        gaps = []
        for factor in (4, 2, 1):
            dt = 2.5e-4 * factor
            dw = lp.coarsen_noise(fine, factor) if factor > 1 else fine
            em = lp.euler_maruyama(spec, dt, dw).values
            cf = lp.linear_sde_solution(spec, dt, dw).values
            gaps.append(np.abs(em - cf).max())
        assert gaps[0] > gaps[1] > gaps[2]


def test_em_guard():
    spec = lp.SdeSpec(lambda t: -50 + 0 * t, lambda t: 0 * t, lambda t: 0 * t, 1.0)
    with pytest.raises(lp.NumericGuardError):
        lp.euler_maruyama(spec, 0.1, np.zeros(10))
