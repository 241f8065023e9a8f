import numpy as np
import pytest

from aclab import profile as prof_mod
from aclab import wells

SQRT2 = np.sqrt(2.0)


@pytest.fixture(scope="module")
def std():
    return wells.standard_well()


@pytest.fixture(scope="module")
def prof(std):
    return prof_mod.solve_profile(std)


def test_profile_matches_tanh(prof):
    # closed form for the standard well: H(t) = tanh(t / sqrt(2))
    t = np.linspace(-10, 10, 2001)
    err = np.max(np.abs(prof.eval_h(t) - np.tanh(t / SQRT2)))
    assert err <= 1e-8


def test_profile_pointwise_examples(prof):
    assert prof.eval_dh(0.0) == pytest.approx(1.0 / SQRT2, abs=1e-10)
    assert prof.eval_h(1.0) == pytest.approx(np.tanh(1.0 / SQRT2), abs=1e-9)
    assert prof.eval_h(0.0) == 0.0


def test_first_integral_and_ode_residual(prof):
    fi = np.max(np.abs(prof.dh**2 - 2.0 * wells.eval_w(prof.well, 0, prof.h)))
    assert fi <= 1e-10
    res = np.max(np.abs(prof.d2h - wells.eval_w(prof.well, 1, prof.h)))
    assert res <= 1e-9


def test_energy_identity(prof):
    # int H'^2 equals the well constant h0
    assert prof_mod.profile_energy(prof) == pytest.approx(prof.h0, abs=1e-8)


def test_tail_expansion_constant(prof):
    # |H(t) - 1 + A0 exp(-sqrt(2) t)| <= C exp(-2 sqrt(2) t) for t >= 4;
    # fit C where the second-order term dominates the A0 fit error
    t = prof.grid[(prof.grid >= 4.0) & (prof.grid <= 8.0)]
    gap = np.abs(prof.eval_h(t) - 1.0 + prof.a0 * np.exp(-SQRT2 * t))
    c_fit = np.max(gap * np.exp(2.0 * SQRT2 * t))
    assert np.isfinite(c_fit)
    # for tanh the second-order tail coefficient is A0^2/2 = 2
    assert c_fit < 10.0


def test_parity_integrals(prof):
    g = prof.grid
    assert abs(np.trapezoid(g * prof.dh**2, g)) <= 1e-10
    assert np.trapezoid(g * prof.dh * prof.d2h, g) == pytest.approx(-prof.h0 / 2, abs=1e-8)


def test_a0_value(prof):
    assert prof.a0 == pytest.approx(2.0, abs=1e-4)


def test_preconditions(std):
    with pytest.raises(ValueError):
        prof_mod.solve_profile(std, t_max=5.0)
    with pytest.raises(ValueError):
        prof_mod.solve_profile(std, n=100)


class TestTruncation:
    def test_plateau_identity(self, prof):
        tp = prof_mod.truncate(prof, 5.0)
        t = np.linspace(-4.9, 4.9, 101)
        assert np.max(np.abs(tp.eval(t) - prof.eval_h(t))) == 0.0

    def test_constant_outside(self, prof):
        tp = prof_mod.truncate(prof, 5.0)
        assert tp.eval(10.5) == 1.0
        assert tp.eval(-10.5) == -1.0
        assert tp.eval(10.5, k=1) == 0.0

    def test_lambda_bounds(self, prof):
        with pytest.raises(ValueError):
            prof_mod.truncate(prof, 3.0)
        with pytest.raises(ValueError):
            prof_mod.truncate(prof, 9.0)

    def test_defect_cubed_scaling(self, std):
        # with lam = 3|log eps| the glue defect is O(eps^3), one constant
        # across a decreasing eps sequence
        prof = prof_mod.solve_profile(std, t_max=30.0, n=8193)
        ratios = []
        for eps in (0.1, 0.05, 0.025):
            lam = 3.0 * abs(np.log(eps))
            tp = prof_mod.truncate(prof, lam)
            ratios.append(tp.defect_sup() / eps**3)
        assert max(ratios) < 1.0  # our quintic glue sits far below the eps^3 ceiling
        assert ratios == sorted(ratios, reverse=True)


@pytest.fixture(scope="module")
def corr(prof):
    return prof_mod.solve_corrector(prof)


class TestCorrector:

    def test_zero_at_origin(self, corr):
        assert corr.eval_j(0.0) == 0.0

    def test_odd(self, corr):
        t = np.linspace(0.25, 10.0, 40)
        assert np.max(np.abs(corr.eval_j(-t) + corr.eval_j(t))) <= 1e-10

    def test_ode_residual(self, corr):
        assert corr.ode_residual() <= 1e-8

    def test_decay(self, corr):
        t_max = corr.grid[-1]
        assert abs(corr.eval_j(t_max)) <= 10.0 * np.exp(-SQRT2 * t_max / 2.0)

    def test_identity_minus_half_h0(self, corr, prof):
        val = prof_mod.corrector_identity(corr)
        assert val == pytest.approx(-prof.h0 / 2.0, abs=1e-6)
        assert val == pytest.approx(-SQRT2 / 3.0, abs=1e-6)


class TestInteraction:
    def test_asymptote_value(self, prof):
        _, asym = prof_mod.interaction_integral(prof, 10.0)
        assert asym == pytest.approx(-16.0 * SQRT2 * np.exp(-10.0 * SQRT2), rel=1e-3)
        assert asym == pytest.approx(-1.632e-5, rel=1e-3)

    def test_ratio_tightens(self, prof):
        rel = []
        for t_sep in (8.0, 10.0, 12.0):
            value, asym = prof_mod.interaction_integral(prof, t_sep)
            rel.append(abs(value / asym - 1.0))
        assert rel[0] <= 0.05
        assert rel[2] <= 0.01
        assert rel == sorted(rel, reverse=True)

    def test_flat_curvature_gives_zero(self, prof):
        # substitute a well with W'' == 2: integrand vanishes identically
        flat = wells.DoubleWell(
            eval=lambda k, t: {0: 1.0 + 0 * t, 1: 0 * t, 2: 2.0 + 0 * t, 3: 0 * t}[k],
            label="flat-curvature",
        )
        hacked = prof_mod.Profile(
            grid=prof.grid, h=prof.h, dh=prof.dh, d2h=prof.d2h, a0=prof.a0, h0=prof.h0, well=flat
        )
        value, _ = prof_mod.interaction_integral(hacked, 6.0)
        assert abs(value) < 1e-12
