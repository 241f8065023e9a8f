import numpy as np
import pytest

from aclab import geometry as geo
from aclab.errors import FoliationOrderError, GeometryDegenerateError, OutOfChartError


@pytest.fixture(scope="module")
def circle_metric():
    return geo.circle_ambient(1.0, z_range=(-0.6, 0.8), n=192)


@pytest.fixture(scope="module")
def flat_circle():
    return geo.flat_product(geo.BaseGrid.circle(2 * np.pi, 128), z_range=(-1, 1))


@pytest.fixture(scope="module")
def synth():
    base = geo.BaseGrid.circle(2 * np.pi, 128)
    return geo.synthetic_potential(base, lambda y: 1.0 + 0.5 * np.cos(y), z_range=(-0.8, 0.8))


class TestLeafEvolution:
    def test_flat_leaves_are_geodesic(self, flat_circle):
        leaf = geo.evolve_geometry(flat_circle, 0.7)
        assert np.all(leaf.mean_curvature == 0)
        assert np.all(leaf.sff_scalar == 0)

    def test_concentric_circles(self, circle_metric):
        for z in (-0.3, 0.0, 0.5):
            leaf = geo.evolve_geometry(circle_metric, z)
            assert leaf.mean_curvature == pytest.approx(1.0 / (1.0 + z), rel=1e-12)

    def test_riccati_matches_closed_form(self, circle_metric, synth):
        for metric, z in ((circle_metric, 0.5), (synth, 0.4), (synth, -0.6)):
            a = geo.evolve_geometry(metric, z)
            b = geo.evolve_geometry(metric, z, method="riccati")
            assert np.max(np.abs(a.mean_curvature - b.mean_curvature)) < 1e-7
            assert np.max(np.abs(a.conformal - b.conformal)) < 1e-7

    def test_riccati_consistency_identity(self, circle_metric, synth, flat_circle):
        for metric in (circle_metric, synth, flat_circle):
            assert metric.riccati_consistency(np.linspace(-0.25, 0.55, 7)) <= 1e-6

    def test_focal_point_detection(self):
        with pytest.raises(GeometryDegenerateError):
            geo.circle_ambient(1.0, z_range=(-1.2, 0.5))


class TestGraphOperators:
    def test_zero_graph_reproduces_leaf(self, circle_metric):
        h = geo.graph_mean_curvature(circle_metric, geo.GraphSurface(0.0, circle_metric))
        assert np.max(np.abs(h - 1.0)) < 1e-12

    def test_flat_constant_graph(self, flat_circle):
        h = geo.graph_mean_curvature(flat_circle, geo.GraphSurface(0.25, flat_circle))
        assert np.max(np.abs(h)) < 1e-12

    def test_offset_circle(self, circle_metric):
        h = geo.graph_mean_curvature(circle_metric, geo.GraphSurface(0.5, circle_metric))
        assert np.max(np.abs(h - 1.0 / 1.5)) < 1e-12

    def test_graph_exits_chart(self, circle_metric):
        with pytest.raises(OutOfChartError):
            geo.GraphSurface(0.9, circle_metric)

    def test_area_flat_zero_graph(self):
        base = geo.BaseGrid.torus((1.0, 1.0), (32, 32))
        metric = geo.flat_product(base)
        assert geo.graph_area(metric, geo.GraphSurface(0.0, metric)) == pytest.approx(1.0, rel=1e-12)

    def test_area_small_sine_expansion(self, flat_circle):
        length = flat_circle.base.lengths[0]
        y = flat_circle.base.axis_nodes(0)
        a = 1e-3
        f = a * np.sin(2 * np.pi * y / length)
        area = geo.graph_area(flat_circle, geo.GraphSurface(f, flat_circle))
        predicted = length + (a * np.pi) ** 2 / length * length**0 * (length / length)
        # expansion: L + (1/4) a^2 k^2 L with k = 2 pi / L
        k = 2 * np.pi / length
        assert area == pytest.approx(length + 0.25 * a**2 * k**2 * length, rel=1e-9)

    def test_product_isometric_leaves(self, flat_circle):
        a0 = geo.graph_area(flat_circle, geo.GraphSurface(0.0, flat_circle))
        a1 = geo.graph_area(flat_circle, geo.GraphSurface(0.6, flat_circle))
        assert a0 == pytest.approx(a1, rel=1e-13)

    def test_mean_curvature_is_area_gradient(self, circle_metric, synth):
        rng = np.random.default_rng(7)
        for metric in (circle_metric, synth):
            base = metric.base
            y = base.axis_nodes(0)
            length = base.lengths[0]
            for _ in range(6):
                coef = rng.normal(size=4) * [0.1, 0.05, 0.02, 0.01]
                f = sum(
                    c * np.cos(2 * np.pi * (k + 1) * y / length + rng.uniform(0, np.pi))
                    for k, c in enumerate(coef)
                )
                phi = sum(
                    rng.normal() * 0.05 * np.sin(2 * np.pi * (k + 1) * y / length)
                    for k in range(3)
                )
                h = geo.graph_mean_curvature(metric, geo.GraphSurface(f, metric))
                c_f = metric.conformal(f)
                pairing = base.integrate_flat(h * phi * c_f ** (base.dim / 2.0))
                s = 1e-5
                ap = geo.graph_area(metric, geo.GraphSurface(f + s * phi, metric))
                am = geo.graph_area(metric, geo.GraphSurface(f - s * phi, metric))
                fd = (ap - am) / (2 * s)
                scale = max(abs(fd), 1e-3)
                assert abs(pairing - fd) / scale < 1e-5


class TestQuadError:
    def test_zero_graph(self, synth):
        q = geo.quad_error(synth, geo.GraphSurface(0.0, synth))
        assert np.max(np.abs(q)) < 1e-12

    def test_flat_constant(self, flat_circle):
        q = geo.quad_error(flat_circle, geo.GraphSurface(0.3, flat_circle))
        assert np.max(np.abs(q)) < 1e-12

    def test_quadratic_scaling(self, circle_metric):
        # the circle family has generic second-order leaf structure
        y = circle_metric.base.axis_nodes(0)
        length = circle_metric.base.lengths[0]
        f = 0.08 * np.cos(2 * np.pi * y / length) + 0.04 * np.sin(4 * np.pi * y / length)
        q1 = np.max(np.abs(geo.quad_error(circle_metric, geo.GraphSurface(f, circle_metric))))
        q2 = np.max(np.abs(geo.quad_error(circle_metric, geo.GraphSurface(f / 2, circle_metric))))
        assert 3.5 <= q1 / q2 <= 4.5

    def test_quadratic_scaling_generic_synthetic(self):
        base = geo.BaseGrid.circle(2 * np.pi, 128)
        metric = geo.synthetic_potential(
            base, lambda y: 0.8 + 0.3 * np.cos(y), cubic=lambda y: 1.5 + np.sin(y), z_range=(-0.8, 0.8)
        )
        y = base.axis_nodes(0)
        f = 0.08 * np.cos(y) + 0.04 * np.sin(2 * y)
        q1 = np.max(np.abs(geo.quad_error(metric, geo.GraphSurface(f, metric))))
        q2 = np.max(np.abs(geo.quad_error(metric, geo.GraphSurface(f / 2, metric))))
        assert 3.5 <= q1 / q2 <= 4.5


class TestJacobi:
    def test_flat_constant_in_kernel(self, flat_circle):
        op = geo.jacobi_operator(flat_circle)
        f = np.ones(flat_circle.base.shape)
        assert np.max(np.abs(op.apply(f))) < 1e-13

    def test_fourier_mode_eigenvalue(self, flat_circle):
        op = geo.jacobi_operator(flat_circle)
        length = flat_circle.base.lengths[0]
        y = flat_circle.base.axis_nodes(0)
        f = np.sin(2 * np.pi * y / length)
        assert np.allclose(op.apply(f), (2 * np.pi / length) ** 2 * f, atol=1e-10)

    def test_constant_potential_shift(self):
        base = geo.BaseGrid.circle(2 * np.pi, 64)
        metric = geo.synthetic_potential(base, 2.0, z_range=(-0.5, 0.5))
        op = geo.jacobi_operator(metric)
        f = np.ones(base.shape)
        assert np.allclose(op.apply(f), -2.0, atol=1e-12)

    def test_nondegeneracy_positive_for_definite_potential(self):
        base = geo.BaseGrid.interval(1.0, 129)
        metric = geo.synthetic_potential(base, -0.5, z_range=(-0.5, 0.5))
        op = geo.jacobi_operator(metric)
        assert op.nondegeneracy_constant() > 0.2


@pytest.fixture(scope="module")
def interval_metric():
    return geo.flat_product(geo.BaseGrid.interval(1.0, 101), z_range=(-1, 1))


class TestMinimalGraph:

    def test_constant_solution(self, interval_metric):
        g = geo.minimal_graph(interval_metric, (0.0, 0.0), t=0.3)
        assert np.max(np.abs(g.f - 0.3)) < 1e-10

    def test_affine_solution(self, interval_metric):
        g = geo.minimal_graph(interval_metric, (0.0, 0.2))
        y = interval_metric.base.axis_nodes(0)
        assert np.max(np.abs(g.f - 0.2 * y)) < 1e-8

    def test_foliation_orders(self, interval_metric):
        leaves = geo.minimal_foliation(interval_metric, (0.0, 0.1), np.linspace(-0.2, 0.2, 5))
        for a, b in zip(leaves, leaves[1:]):
            assert np.all(b.f > a.f)

    def test_curved_foliation_orders(self):
        base = geo.BaseGrid.interval(1.0, 81)
        metric = geo.synthetic_potential(base, lambda y: -0.4 - 0.2 * np.cos(2 * np.pi * y), z_range=(-0.6, 0.6))
        leaves = geo.minimal_foliation(metric, (0.0, 0.05), [-0.1, 0.0, 0.1])
        for a, b in zip(leaves, leaves[1:]):
            assert np.all(b.f > a.f)


def test_resolve_metric_kinds():
    m = geo.resolve_metric({"kind": "flat-product", "base": "circle", "n": 16, "length": 1.0})
    assert m.base.periodic[0] and m.base.shape == (16,)
    m2 = geo.resolve_metric({"kind": "circle", "radius": 2.0, "z_range": (-0.5, 0.5), "n": 32})
    assert np.allclose(m2.mean_curvature_leaf(0.0), 0.5)
    m3 = geo.resolve_metric({"kind": "synthetic", "base": "circle", "n": 32, "length": 2 * np.pi,
                             "potential": [0.5, 0.25], "z_range": (-0.5, 0.5)})
    y = m3.base.axis_nodes(0)
    assert np.allclose(m3.jacobi_potential(), 0.5 + 0.25 * np.cos(y), atol=1e-12)
    with pytest.raises(ValueError):
        geo.resolve_metric({"kind": "nope"})
