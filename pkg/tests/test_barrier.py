import numpy as np
import pytest

from aclab import barrier as bar
from aclab import field as fld_mod
from aclab import geometry as geo
from aclab import profile as prof_mod
from aclab import wells


@pytest.fixture(scope="module")
def std():
    return wells.standard_well()


@pytest.fixture(scope="module")
def prof(std):
    return prof_mod.solve_profile(std)


class TestCutoffs:
    @pytest.mark.parametrize("j", [1, 2, 3, 4, 5])
    def test_plateau_and_support(self, j):
        eps, ds = 0.1, 0.5
        chi = bar.cutoffs(eps, ds, j)
        scale = eps**ds
        t_in = scale * (1 - (2 * j - 1) / 100.0)
        t_out = scale * (1 - (2 * j - 2) / 100.0)
        assert chi(0.999 * t_in) == 1.0
        assert chi(-0.999 * t_in) == 1.0
        assert chi(1.001 * t_out) == 0.0
        mid = 0.5 * (t_in + t_out)
        assert 0.0 < chi(mid) < 1.0

    def test_even(self):
        chi = bar.cutoffs(0.08, 0.5, 3)
        t = np.linspace(-0.5, 0.5, 501)
        assert np.max(np.abs(chi(t) - chi(-t))) == 0.0

    def test_bad_args(self):
        with pytest.raises(ValueError):
            bar.cutoffs(0.1, 0.5, 0)
        with pytest.raises(ValueError):
            bar.cutoffs(0.1, 1.5, 1)

    def test_derivative_consistency(self):
        chi = bar.cutoffs(0.1, 0.5, 2)
        t = np.linspace(0.28, 0.32, 2001)
        h = t[1] - t[0]
        fd = np.gradient(chi(t), h, edge_order=2)
        assert np.max(np.abs(fd - chi(t, 1))) < 1e-3 * np.max(np.abs(chi(t, 1)) + 1)


class TestTildeProfile:
    def test_matches_profile_near_zero(self, prof):
        eps = 0.1
        tp = bar.TildeProfile(prof, eps, bar.cutoffs(eps, 0.5, 1))
        z = np.linspace(-0.2, 0.2, 101)
        assert np.allclose(tp.eval(z), prof.eval_h(z / eps), atol=0, rtol=0)

    def test_constant_far_out(self, prof):
        eps = 0.1
        tp = bar.TildeProfile(prof, eps, bar.cutoffs(eps, 0.5, 1))
        assert tp.eval(0.45) == 1.0
        assert tp.eval(-0.45) == -1.0
        assert tp.eval(0.45, 1) == 0.0


class TestOffsetMap:
    def test_identity_for_zero(self):
        chi2 = bar.cutoffs(0.1, 0.5, 2)
        omap = bar.OffsetMap(zeta=np.zeros(5), chi2=chi2)
        t = np.linspace(-0.4, 0.4, 101)
        fwd = omap.forward(t)
        assert np.max(np.abs(fwd - t[None, :])) == 0.0

    def test_identity_outside_support(self):
        chi2 = bar.cutoffs(0.1, 0.5, 2)
        omap = bar.OffsetMap(zeta=np.full(3, 5e-4), chi2=chi2)
        t = np.array([-0.45, 0.4, 0.45])
        assert np.max(np.abs(omap.forward(t) - t[None, :])) == 0.0

    def test_inverse_roundtrip(self):
        chi2 = bar.cutoffs(0.1, 0.5, 2)
        zeta = 4e-4 * np.sin(np.linspace(0, np.pi, 7))
        omap = bar.OffsetMap(zeta=zeta, chi2=chi2)
        t = np.linspace(-0.45, 0.45, 301)
        fwd = omap.forward(t)
        inv = omap.inverse(t)
        # D_zeta(inverse points) = t
        recon = inv - chi2(inv) * zeta[:, None]
        assert np.max(np.abs(recon - t[None, :])) < 1e-10

    def test_rejects_large_zeta(self):
        chi2 = bar.cutoffs(0.1, 0.5, 2)
        with pytest.raises(ValueError):
            bar.OffsetMap(zeta=np.full(3, 0.05), chi2=chi2)


@pytest.fixture(scope="module")
def flat_problem(prof):
    base = geo.BaseGrid.interval(1.0, 17)
    metric = geo.flat_product(base, z_range=(-0.48, 0.48))
    return bar.BarrierProblem(metric, prof, 0.1, points_per_band=6.0)


class TestFunctionals:
    def test_q_vanishes_at_zero(self, flat_problem):
        z0 = np.zeros(flat_problem.disc.shape)
        fn = flat_problem.functionals(z0, z0, np.zeros(flat_problem.ny))
        assert np.max(np.abs(fn["Q"])) == 0.0

    def test_source_identities_at_zero(self, flat_problem):
        z0 = np.zeros(flat_problem.disc.shape)
        fn = flat_problem.functionals(z0, z0, np.zeros(flat_problem.ny))
        assert np.allclose(fn["M"], -flat_problem.chi3_f * fn["E"], atol=1e-14)
        assert np.allclose(fn["N"], (1.0 - flat_problem.chi4_f) * fn["E"], atol=1e-14)

    def test_defect_size_flat(self, flat_problem):
        # flat product metric: E(0) is the chi1-glue defect, small in sup
        z0 = np.zeros(flat_problem.disc.shape)
        fn = flat_problem.functionals(z0, z0, np.zeros(flat_problem.ny))
        interior = flat_problem.free.reshape(flat_problem.disc.shape)
        band = np.abs(flat_problem.h_tilde) < 1 - 1e-9
        sup_in_layer = np.max(np.abs(fn["E"] * (np.abs(flat_problem.h_tilde) < 0.9)))
        assert sup_in_layer < 1e-4  # away from the glue band the profile solves the ODE


class TestFixedPoint:
    def test_flat_zero_data(self, flat_problem, prof):
        metric = flat_problem.metric
        ny, nz = flat_problem.disc.shape
        bd = bar.BoundaryData(
            v_flat_hat={
                "y_lo": np.zeros(nz),
                "y_hi": np.zeros(nz),
                "z_lo": np.zeros(ny),
                "z_hi": np.zeros(ny),
            },
            v_sharp_hat={"y_lo": np.zeros(nz), "y_hi": np.zeros(nz)},
            zeta_hat=(0.0, 0.0),
        )
        state = bar.fixed_point_solve(bd, metric, prof, 0.1, tol=1e-8, problem=flat_problem)
        assert state.residual <= 1e-8
        assert max(state.contraction_factors[:4]) < 1.0
        assert state.norms["pi_v_sharp"] < 1e-10
        # flat metric: the vertical offset stays zero by parity
        assert np.max(np.abs(state.zeta)) < 1e-12
        # boundary data matched exactly at nodes
        assert np.max(np.abs(state.v_flat[0, :])) == 0.0
        assert np.max(np.abs(state.v_sharp[-1, :])) == 0.0

    def test_nonminimal_leaf_rejected(self, prof):
        metric = geo.circle_ambient(1.0, z_range=(-0.3, 0.3), n=16)
        bd = bar.BoundaryData(v_flat_hat={}, v_sharp_hat={}, zeta_hat=(0, 0))
        with pytest.raises(ValueError):
            bar.fixed_point_solve(bd, metric, prof, 0.1)


class TestComparison:
    def test_artificial_order(self, flat_problem, prof, std):
        metric = flat_problem.metric
        z = fld_mod.make_z_grid(metric.z_range, 0.1, 10)
        disc = fld_mod.FieldDiscretization(metric, 0.1, z, z_periodic=False)
        zz = z[None, :] * np.ones(disc.shape)
        u = np.clip(np.tanh(zz / (np.sqrt(2) * 0.1)), -1, 1)
        upper = fld_mod.PhaseField(disc=disc, u=u, well=std)
        lower = fld_mod.PhaseField(disc=disc, u=np.clip(u - 0.1, -1 - 1e-6, 1), well=std)
        rep = bar.comparison_check(lower, upper)
        assert rep.ordered
        assert rep.min_gap > 0

    def test_boundary_violation_raises(self, flat_problem, prof, std):
        metric = flat_problem.metric
        z = fld_mod.make_z_grid(metric.z_range, 0.1, 10)
        disc = fld_mod.FieldDiscretization(metric, 0.1, z, z_periodic=False)
        zz = z[None, :] * np.ones(disc.shape)
        u = np.clip(np.tanh(zz / (np.sqrt(2) * 0.1)), -1, 1)
        f1 = fld_mod.PhaseField(disc=disc, u=u, well=std)
        f2 = fld_mod.PhaseField(disc=disc, u=u, well=std)
        with pytest.raises(ValueError):
            bar.comparison_check(f1, f2)

    def test_translate_field(self, flat_problem, prof, std):
        metric = flat_problem.metric
        z = fld_mod.make_z_grid(metric.z_range, 0.1, 10)
        disc = fld_mod.FieldDiscretization(metric, 0.1, z, z_periodic=False)
        zz = z[None, :] * np.ones(disc.shape)
        u = np.clip(np.tanh(zz / (np.sqrt(2) * 0.1)), -1, 1)
        f = fld_mod.PhaseField(disc=disc, u=u, well=std)
        up = bar.translate_field(f, 0.2)
        stack = fld_mod.nodal_layers(up)
        assert stack.q == 1
        assert np.max(np.abs(stack.sheets[0] - 0.2)) < 1e-3

    def test_decay_constant(self, flat_problem, prof, std):
        eps = 0.1
        metric = flat_problem.metric
        z = fld_mod.make_z_grid(metric.z_range, eps, 10)
        disc = fld_mod.FieldDiscretization(metric, eps, z, z_periodic=False)
        zz = z[None, :] * np.ones(disc.shape)
        u = np.clip(np.tanh(zz / (np.sqrt(2) * eps)), -1, 1)
        f = fld_mod.PhaseField(disc=disc, u=u, well=std)
        b = bar.measure_decay_constant(f, [np.zeros(disc.shape[0])])
        assert 0 < b < 3.0


class TestHolderNorm:
    def test_constant_field(self):
        v = np.ones((8, 16))
        n = bar.weighted_holder_norm(v, (0.1, 0.05), 0.1)
        assert n == pytest.approx(1.0, abs=1e-10)

    def test_scaling_linear(self):
        rng = np.random.default_rng(0)
        v = rng.standard_normal((8, 16))
        n1 = bar.weighted_holder_norm(v, (0.1, 0.05), 0.1)
        n2 = bar.weighted_holder_norm(2 * v, (0.1, 0.05), 0.1)
        assert n2 == pytest.approx(2 * n1, rel=1e-12)
