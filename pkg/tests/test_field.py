import numpy as np
import pytest

from aclab import field as fld_mod
from aclab import geometry as geo
from aclab import profile as prof_mod
from aclab import wells
from aclab.errors import NodalTopologyError, NumericFailure


@pytest.fixture(scope="module")
def std():
    return wells.standard_well()


@pytest.fixture(scope="module")
def prof(std):
    return prof_mod.solve_profile(std)


@pytest.fixture(scope="module")
def prof_long(std):
    # table long enough for the 3|log eps| truncation at eps >= 0.01
    return prof_mod.solve_profile(std, t_max=30.0, n=8193)


@pytest.fixture(scope="module")
def flat_metric():
    return geo.flat_product(geo.BaseGrid.circle(2 * np.pi, 32), z_range=(-1, 1))


def make_constant_field(metric, value, epsilon=0.1, ppe=10):
    z = fld_mod.make_z_grid(metric.z_range, epsilon, ppe)
    disc = fld_mod.FieldDiscretization(metric, epsilon, z, z_periodic=False)
    return fld_mod.PhaseField(disc=disc, u=np.full(disc.shape, value), well=wells.standard_well())


@pytest.fixture(scope="module")
def single_layer(flat_metric, prof, std):
    eps = 0.08
    f = fld_mod.superpose(flat_metric, prof, eps, [np.zeros(32)], points_per_eps=12)
    solved, hist = fld_mod.newton_solve(f, tol=1e-11)
    return solved, hist


class TestEnergyResidual:
    def test_pure_phase_energy_zero(self, flat_metric):
        f = make_constant_field(flat_metric, 1.0)
        assert fld_mod.energy(f) == pytest.approx(0.0, abs=1e-11)
        assert np.max(np.abs(fld_mod.residual(f))) < 1e-11

    def test_zero_state(self, flat_metric):
        f = make_constant_field(flat_metric, 0.0)
        vol = 2 * np.pi * 2.0
        assert fld_mod.energy(f) == pytest.approx(0.25 * vol / f.epsilon, rel=1e-12)
        assert np.max(np.abs(fld_mod.residual(f))) < 1e-11  # W'(0) = 0

    def test_minus_one_residual(self, flat_metric):
        f = make_constant_field(flat_metric, -1.0)
        assert np.max(np.abs(fld_mod.residual(f))) < 1e-11

    def test_single_layer_energy(self, flat_metric, prof_long):
        eps = 0.05
        prof = prof_long
        f = fld_mod.superpose(flat_metric, prof, eps, [np.zeros(32)], points_per_eps=16)
        e = fld_mod.energy(f)
        length = 2 * np.pi
        assert abs(e / (prof.h0 * length) - 1.0) < 0.01

    def test_heteroclinic_residual_refines(self, flat_metric, prof):
        eps = 0.1
        sups = []
        for ppe in (8, 16, 32):
            f = fld_mod.superpose(flat_metric, prof, eps, [np.zeros(32)], points_per_eps=ppe)
            u_exact = np.tanh(
                (f.disc.z_nodes / (np.sqrt(2) * eps)).reshape(1, -1) * np.ones(f.disc.shape)
            )
            f = f.copy_with(u_exact)
            sups.append(np.max(np.abs(fld_mod.residual(f))))
        # second-order stencils: refinement by 2 drops the residual ~4x
        assert sups[1] / sups[0] < 0.35
        assert sups[2] / sups[1] < 0.35


class TestSuperpose:
    def test_far_field_parity(self, flat_metric, prof, prof_long):
        eps = 0.08
        one = fld_mod.superpose(flat_metric, prof, eps, [np.zeros(32)])
        assert one.u[0, 0] == pytest.approx(-1.0, abs=1e-7)
        assert one.u[0, -1] == pytest.approx(1.0, abs=1e-7)
        two = fld_mod.superpose(flat_metric, prof_long, 0.04, [np.full(32, -0.3), np.full(32, 0.3)])
        assert two.u[0, 0] == pytest.approx(-1.0, abs=1e-7)
        assert two.u[0, -1] == pytest.approx(-1.0, abs=1e-7)

    def test_separation_guard(self, flat_metric, prof):
        with pytest.raises(ValueError):
            fld_mod.superpose(flat_metric, prof, 0.1, [np.zeros(32), np.full(32, 0.2)])

    def test_ansatz_residual_truncation_only(self, flat_metric, prof_long):
        prof = prof_long
        # flat sheet in a product metric: only the glue defect remains
        ratios = []
        for eps in (0.1, 0.05, 0.025):
            r = fld_mod.ansatz_residual(
                flat_metric, prof, eps, [np.zeros(32)], np.linspace(-0.9, 0.9, 400)
            )
            ratios.append(r / eps**3)
        assert max(ratios) < 1.0

    def test_roundtrip_offsets(self, flat_metric, prof):
        eps = 0.08
        h_true = 0.3 * eps
        f = fld_mod.superpose(flat_metric, prof, eps, [np.zeros(32)], offsets=[np.full(32, h_true)])
        stack = fld_mod.nodal_layers(f)
        fitted = fld_mod.fit_offsets(f, stack, prof)
        # sheets absorb the offset, so h(sheet) + f(sheet) recovers h_true
        recovered = fitted.offsets[0] + stack.sheets[0]
        assert np.max(np.abs(recovered - h_true)) < 1e-8
        assert fitted.orth_residual <= 1e-8
        assert fitted.phi_sup < 5e-4


class TestNodalLayers:
    def test_flat_layer_position(self, flat_metric, prof):
        eps = 0.08
        f = fld_mod.superpose(flat_metric, prof, eps, [np.full(32, 0.1)])
        stack = fld_mod.nodal_layers(f)
        assert stack.q == 1
        assert np.max(np.abs(stack.sheets[0] - 0.1)) < 1e-6

    def test_no_zeros(self, flat_metric):
        f = make_constant_field(flat_metric, 0.9)
        stack = fld_mod.nodal_layers(f)
        assert stack.q == 0
        assert stack.sheets == []

    def test_two_layer_gaps(self, flat_metric, prof):
        eps = 0.08
        f = fld_mod.superpose(flat_metric, prof, eps, [np.full(32, -0.4), np.full(32, 0.4)])
        stack = fld_mod.nodal_layers(f)
        assert stack.q == 2
        assert stack.min_gaps[0] == pytest.approx(0.8, abs=1e-5)
        assert stack.min_gaps[1] == pytest.approx(0.8, abs=1e-5)


class TestSolvers:
    def test_newton_from_critical_point(self, flat_metric):
        f = make_constant_field(flat_metric, 1.0)
        out, hist = fld_mod.newton_solve(f, tol=1e-10)
        assert len(hist) == 1  # already below tolerance

    def test_newton_single_layer(self, single_layer):
        solved, hist = single_layer
        assert hist[-1] <= 1e-11
        # quadratic contraction while above round-off
        rates = [
            hist[k + 1] / hist[k] ** 2
            for k in range(len(hist) - 1)
            if hist[k + 1] > 1e-13 and hist[k] < 0.5
        ]
        assert rates and max(rates) < 50.0

    def test_newton_interior_max_principle(self, single_layer):
        solved, _ = single_layer
        interior = solved.disc.interior.reshape(solved.disc.shape)
        assert np.max(np.abs(solved.u[interior])) < 1.0

    def test_energy_stationarity(self, single_layer, flat_metric):
        solved, _ = single_layer
        rng = np.random.default_rng(3)
        z = solved.disc.z_nodes
        bump = np.exp(-((z - 0.2) ** 2) / 0.02)
        y = flat_metric.base.axis_nodes(0)
        pert = (np.cos(y)[:, None] * bump[None, :]) * solved.disc.interior.reshape(solved.disc.shape)
        e0 = fld_mod.energy(solved)
        for s in (1e-3, 1e-4):
            e = fld_mod.energy(solved.copy_with(solved.u + s * pert))
            assert abs(e - e0) < 20.0 * s**2

    def test_too_close_seed_never_returns_stack(self, flat_metric, prof, std):
        eps = 0.1
        z = fld_mod.make_z_grid(flat_metric.z_range, eps, 10)
        disc = fld_mod.FieldDiscretization(flat_metric, eps, z, z_periodic=False)
        sep = 0.5 * eps
        zz = z.reshape(1, -1)
        u = np.tanh((zz + sep / 2) / (np.sqrt(2) * eps)) * np.tanh(
            -(zz - sep / 2) / (np.sqrt(2) * eps)
        ) * np.ones(disc.shape)
        u[..., 0] = u[..., -1]  # consistent far-field
        f = fld_mod.PhaseField(disc=disc, u=np.clip(u, -1, 1), well=std)
        try:
            out, _ = fld_mod.newton_solve(f, tol=1e-9, max_iter=60)
            stack = fld_mod.nodal_layers(out)
            assert stack.q != 2 or min(stack.min_gaps) > 4 * eps
        except NumericFailure:
            pass

    def test_gradient_flow_monotone(self, flat_metric, std):
        rng = np.random.default_rng(11)
        f = make_constant_field(flat_metric, 1.0)
        pert = 0.05 * rng.standard_normal(f.disc.shape) * f.disc.interior.reshape(f.disc.shape)
        f = f.copy_with(np.clip(f.u + pert, -1, 1))
        out, trace = fld_mod.gradient_flow(f, dt=0.02, steps=60)
        assert np.all(np.diff(trace) <= 1e-12 * (1 + np.abs(trace[:-1])))
        assert np.max(np.abs(out.u - 1.0)) < 0.02

    def test_flow_fixed_at_critical_point(self, single_layer):
        solved, _ = single_layer
        out, trace = fld_mod.gradient_flow(solved, dt=0.01, steps=5)
        assert np.max(np.abs(out.u - solved.u)) < 1e-9


class TestMassAndCurvature:
    def test_varifold_mass_trivial(self, flat_metric, prof):
        f = make_constant_field(flat_metric, 1.0)
        assert abs(fld_mod.varifold_mass(f, prof.h0)) < 1e-11

    def test_varifold_mass_single_layer(self, flat_metric, prof_long):
        prof = prof_long
        eps = 0.05
        f = fld_mod.superpose(flat_metric, prof, eps, [np.zeros(32)], points_per_eps=16)
        stack = fld_mod.nodal_layers(f)
        mass = fld_mod.varifold_mass(f, prof.h0)
        area = fld_mod.nodal_measure(f, stack)
        assert abs(mass / area - 1.0) < 0.01

    def test_two_layer_mass_consistency(self, flat_metric, prof_long):
        prof = prof_long
        eps = 0.05
        f = fld_mod.superpose(
            flat_metric, prof, eps, [np.full(32, -0.45), np.full(32, 0.45)], points_per_eps=16
        )
        stack = fld_mod.nodal_layers(f)
        mass = fld_mod.varifold_mass(f, prof.h0)
        area = fld_mod.nodal_measure(f, stack)
        assert stack.q == 2
        assert abs(mass / area - 1.0) < 0.02

    def test_enhanced_sff_flat_layer(self, single_layer):
        solved, _ = single_layer
        samples, sup, mask, kappa = fld_mod.enhanced_sff(solved, beta=0.1)
        assert sup < 5e-3  # flat level sets in a flat metric
        assert np.all(samples >= np.abs(kappa) - 1e-8)

    def test_enhanced_sff_dominates_level_curvature(self, prof, std):
        # curved sheets: synthetic metric bends the layer
        base = geo.BaseGrid.circle(2 * np.pi, 48)
        metric = geo.synthetic_potential(base, lambda y: 0.5 + 0.3 * np.cos(y), z_range=(-1, 1))
        eps = 0.08
        y = base.axis_nodes(0)
        f = fld_mod.superpose(metric, prof, eps, [0.01 * np.cos(y)], points_per_eps=12)
        solved, _ = fld_mod.newton_solve(f, tol=1e-10)
        samples, sup, mask, kappa = fld_mod.enhanced_sff(solved, beta=0.1)
        assert np.all(samples >= np.abs(kappa) - 1e-8)
        assert np.isfinite(sup)
