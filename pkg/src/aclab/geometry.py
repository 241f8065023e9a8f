"""Fermi-coordinate geometry over flat bases.

Every shipped ambient metric has the warped form g = w(y,z)^2 g0 + dz^2
with g0 flat (circle, interval, or torus base) and w a closed-form warp
factor. All leaf data follows from w:

    sff_z = (dw/dz / w) g_z          (conformal shape operator)
    H_z   = d * dw/dz / w            (d = base dimension)
    Ric(dz, dz) = -d * d2w/dz2 / w   (exact via the Riccati identity)

The z = 0 leaf is the distinguished base surface. Graph operations
(mean curvature, area, quadratic error) are discretized with spectral
derivatives on periodic axes and centered second-order stencils on
intervals, which is what the acceptance tolerances assume.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from aclab.errors import (
    FoliationOrderError,
    GeometryDegenerateError,
    NumericFailure,
    OutOfChartError,
)


# ---------------------------------------------------------------------------
# base grids


@dataclass(frozen=True)
class BaseGrid:
    """Uniform tensor grid on a flat base (circle, interval, or torus)."""

    lengths: tuple
    shape: tuple
    periodic: tuple

    @classmethod
    def circle(cls, length: float, n: int) -> "BaseGrid":
        return cls((float(length),), (int(n),), (True,))

    @classmethod
    def interval(cls, length: float, n: int) -> "BaseGrid":
        return cls((float(length),), (int(n),), (False,))

    @classmethod
    def torus(cls, lengths, shape) -> "BaseGrid":
        lx, ly = lengths
        nx, ny = shape
        return cls((float(lx), float(ly)), (int(nx), int(ny)), (True, True))

    @property
    def dim(self) -> int:
        return len(self.shape)

    def axis_nodes(self, axis: int) -> np.ndarray:
        n, length = self.shape[axis], self.lengths[axis]
        if self.periodic[axis]:
            return length * np.arange(n) / n
        return np.linspace(0.0, length, n)

    def spacing(self, axis: int) -> float:
        n, length = self.shape[axis], self.lengths[axis]
        return length / n if self.periodic[axis] else length / (n - 1)

    def mesh(self):
        axes = [self.axis_nodes(a) for a in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")

    def deriv(self, f: np.ndarray, axis: int, order: int = 1) -> np.ndarray:
        """Spectral derivative on periodic axes, centered stencils otherwise."""
        h = self.spacing(axis)
        if self.periodic[axis]:
            n = self.shape[axis]
            k = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
            if order == 1 and n % 2 == 0:
                k = k.copy()
                k[n // 2] = 0.0  # drop the Nyquist mode: keeps D skew-symmetric
            fh = np.fft.fft(f, axis=axis)
            mult = (1j * k) ** order
            sh = [1] * f.ndim
            sh[axis] = n
            return np.real(np.fft.ifft(fh * mult.reshape(sh), axis=axis))
        if order == 1:
            return np.gradient(f, h, axis=axis, edge_order=2)
        if order == 2:
            out = np.empty_like(f)
            fm = np.moveaxis(f, axis, 0)
            om = np.moveaxis(out, axis, 0)
            om[1:-1] = (fm[2:] - 2.0 * fm[1:-1] + fm[:-2]) / h**2
            om[0] = (2 * fm[0] - 5 * fm[1] + 4 * fm[2] - fm[3]) / h**2
            om[-1] = (2 * fm[-1] - 5 * fm[-2] + 4 * fm[-3] - fm[-4]) / h**2
            return out
        raise ValueError("order must be 1 or 2")

    def quad_weights(self) -> np.ndarray:
        """Flat quadrature weights (tensor trapezoid; exact sum on circles)."""
        w = np.array(1.0)
        for a in range(self.dim):
            h = self.spacing(a)
            n = self.shape[a]
            wa = np.full(n, h)
            if not self.periodic[a]:
                wa[0] = wa[-1] = h / 2.0
            sh = [1] * self.dim
            sh[a] = n
            w = w * wa.reshape(sh)
        return w * np.ones(self.shape)

    def integrate_flat(self, f: np.ndarray) -> float:
        return float(np.sum(f * self.quad_weights()))


# ---------------------------------------------------------------------------
# warped metrics


def _bshape(Y, z):
    return np.broadcast_shapes(np.shape(Y[0]), np.shape(z))


@dataclass(frozen=True)
class WarpedMetric:
    """Ambient metric g = w(y,z)^2 g0 + dz^2 over a flat base grid.

    warp, warp_dz, warp_dzz take (mesh tuple, z); the caller passes
    mutually broadcastable shapes and receives the broadcast result.
    """

    base: BaseGrid
    z_range: tuple
    warp: Callable = None
    warp_dz: Callable = None
    warp_dzz: Callable = None
    label: str = "metric"

    def __post_init__(self):
        if self.warp is None:
            one = lambda Y, z: np.ones(_bshape(Y, z))
            zero = lambda Y, z: np.zeros(_bshape(Y, z))
            object.__setattr__(self, "warp", one)
            object.__setattr__(self, "warp_dz", zero)
            object.__setattr__(self, "warp_dzz", zero)

    # leaf data ------------------------------------------------------------
    def _check_chart(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(z < self.z_range[0] - 1e-12) or np.any(z > self.z_range[1] + 1e-12):
            raise OutOfChartError(
                f"z outside chart range {self.z_range} for metric {self.label}"
            )

    def warp_at(self, z):
        self._check_chart(z)
        Y = self.base.mesh()
        w = self.warp(Y, z) * np.ones(self.base.shape)
        if np.any(w <= 0):
            raise GeometryDegenerateError(
                f"metric {self.label} degenerates inside the chart", focal_distance=None
            )
        return w

    def conformal(self, z):
        """Conformal factor of g_z against the flat base metric."""
        return self.warp_at(z) ** 2

    def shape_scalar(self, z):
        """sigma = (dw/dz)/w; sff_z = sigma * g_z."""
        Y = self.base.mesh()
        return (self.warp_dz(Y, z) / self.warp(Y, z)) * np.ones(self.base.shape)

    def mean_curvature_leaf(self, z):
        """H_z: divergence of the upward unit normal of the z = const leaf."""
        return self.base.dim * self.shape_scalar(z)

    def sff_norm2(self, z):
        return self.base.dim * self.shape_scalar(z) ** 2

    def ric_zz(self, z):
        Y = self.base.mesh()
        return (-self.base.dim * self.warp_dzz(Y, z) / self.warp(Y, z)) * np.ones(self.base.shape)

    def jacobi_potential(self) -> np.ndarray:
        """|sff_Sigma|^2 + Ric(dz,dz) on the z = 0 leaf."""
        return self.sff_norm2(0.0) + self.ric_zz(0.0)

    def volume_element(self, z):
        """sqrt(det g_z) against flat coordinates."""
        return self.warp_at(z) ** self.base.dim

    def warp_fields(self, z_nodes):
        """(w, dw/dz, d2w/dz2) on the tensor grid base x z_nodes."""
        self._check_chart(z_nodes)
        Y = tuple(g[..., None] for g in self.base.mesh())
        z = np.asarray(z_nodes, dtype=float).reshape((1,) * self.base.dim + (-1,))
        shape = self.base.shape + (len(np.atleast_1d(z_nodes)),)
        ones = np.ones(shape)
        return (
            self.warp(Y, z) * ones,
            self.warp_dz(Y, z) * ones,
            self.warp_dzz(Y, z) * ones,
        )

    def riccati_consistency(self, z_samples) -> float:
        """sup over samples of |dH/dz + |sff|^2 + Ric(dz,dz)| (5-point dH/dz)."""
        worst = 0.0
        dz = 1e-4 * (self.z_range[1] - self.z_range[0])
        for z in z_samples:
            zs = z + dz * np.array([-2, -1, 1, 2])
            if zs[0] < self.z_range[0] or zs[-1] > self.z_range[1]:
                continue
            hs = [self.mean_curvature_leaf(s) for s in zs]
            dh = (hs[0] - 8 * hs[1] + 8 * hs[2] - hs[3]) / (12 * dz)
            gap = np.max(np.abs(dh + self.sff_norm2(z) + self.ric_zz(z)))
            worst = max(worst, float(gap))
        return worst


def flat_product(base: BaseGrid, z_range=(-1.0, 1.0), label="flat-product") -> WarpedMetric:
    """Product metric: totally geodesic leaves, zero curvature data."""
    return WarpedMetric(base=base, z_range=z_range, label=label)


def circle_ambient(radius: float, z_range, n: int = 256, label=None) -> WarpedMetric:
    """Concentric circles in the flat plane; base = circle of given radius.

    y is arclength on the base circle; the z = const leaf is the circle of
    radius R + z, so H_z = 1/(R + z) with the upward (outward) normal.
    """
    if z_range[0] <= -radius:
        raise GeometryDegenerateError(
            "chart reaches the focal point of the circle", focal_distance=radius
        )
    base = BaseGrid.circle(2.0 * np.pi * radius, n)
    R = float(radius)
    return WarpedMetric(
        base=base,
        z_range=z_range,
        warp=lambda Y, z: (R + np.asarray(z, dtype=float)) / R * np.ones(_bshape(Y, z)),
        warp_dz=lambda Y, z: np.full(_bshape(Y, z), 1.0 / R),
        warp_dzz=lambda Y, z: np.zeros(_bshape(Y, z)),
        label=label or f"circle-R{radius:g}",
    )


def synthetic_potential(
    base: BaseGrid, potential, z_range=(-1.0, 1.0), cubic=0.0, label="synthetic"
) -> WarpedMetric:
    """Warped metric with a minimal z = 0 leaf and prescribed Jacobi potential.

    With w = exp(psi), psi = -V(y) z^2/(2d) + B(y) z^3/(6d): sff_Sigma = 0,
    H_0 = 0, and |sff_Sigma|^2 + Ric(dz,dz)|_Sigma = V(y) regardless of B.
    A nonzero cubic coefficient B makes the second-order z-structure of the
    leaves generic. Both V and B may be callables of the mesh or arrays.
    """
    d = base.dim

    def as_callable(p):
        if callable(p):
            return p
        if np.ndim(p) == 0:
            val = float(p)
            return lambda *Y: val * np.ones(np.shape(Y[0]))
        arr = np.asarray(p, dtype=float)
        if base.dim != 1:
            raise NotImplementedError("array potentials shipped for 1-d bases")
        from scipy.interpolate import CubicSpline

        nodes = base.axis_nodes(0)
        if base.periodic[0]:
            sp = CubicSpline(np.append(nodes, base.lengths[0]), np.append(arr, arr[0]), bc_type="periodic")
            return lambda y: sp(np.mod(y, base.lengths[0]))
        sp = CubicSpline(nodes, arr)
        return lambda y: sp(y)

    v_fun = as_callable(potential)
    b_fun = as_callable(cubic)

    def psi_dots(Y, z):
        z = np.asarray(z, dtype=float)
        v = v_fun(*Y)
        b = b_fun(*Y)
        psi = -v * z**2 / (2.0 * d) + b * z**3 / (6.0 * d)
        dpsi = -v * z / d + b * z**2 / (2.0 * d)
        ddpsi = -v / d + b * z / d
        return psi, dpsi, ddpsi

    def warp(Y, z):
        psi, _, _ = psi_dots(Y, z)
        return np.exp(psi)

    def warp_dz(Y, z):
        psi, dpsi, _ = psi_dots(Y, z)
        return dpsi * np.exp(psi)

    def warp_dzz(Y, z):
        psi, dpsi, ddpsi = psi_dots(Y, z)
        return (ddpsi + dpsi**2) * np.exp(psi)

    return WarpedMetric(base=base, z_range=z_range, warp=warp, warp_dz=warp_dz, warp_dzz=warp_dzz, label=label)


# ---------------------------------------------------------------------------
# leaf evolution


@dataclass
class LeafGeometry:
    z: float
    conformal: np.ndarray  # g_z = conformal * flat
    sff_scalar: np.ndarray  # sff_z = sff_scalar * g_z
    mean_curvature: np.ndarray


def evolve_geometry(metric: WarpedMetric, z: float, method: str = "closed-form") -> LeafGeometry:
    """Leaf data (g_z, sff_z, H_z) at offset z.

    "closed-form" evaluates the metric's own warp data. "riccati"
    integrates d(log w)/dz = sigma, d sigma/dz = -sigma^2 - ric/d from
    the z = 0 leaf with an adaptive high-order integrator, using only
    curvature data; it exists to cross-check the closed forms.
    """
    metric._check_chart(z)
    if method == "closed-form":
        return LeafGeometry(
            z=float(z),
            conformal=metric.conformal(z),
            sff_scalar=metric.shape_scalar(z),
            mean_curvature=metric.mean_curvature_leaf(z),
        )
    if method != "riccati":
        raise ValueError(method)
    d = metric.base.dim
    shape = metric.base.shape
    npts = int(np.prod(shape))
    u0 = np.log(metric.warp_at(0.0)).ravel()
    s0 = metric.shape_scalar(0.0).ravel()

    def rhs(zz, state):
        u, s = state[:npts], state[npts:]
        ric = metric.ric_zz(zz).ravel()
        return np.concatenate([s, -(s**2) - ric / d])

    def collapse(zz, state):
        return np.max(state[:npts]) + 20.0

    collapse.terminal = True
    sol = integrate.solve_ivp(
        rhs,
        (0.0, float(z)),
        np.concatenate([u0, s0]),
        rtol=1e-10,
        atol=1e-12,
        dense_output=False,
        events=collapse,
        method="RK45",
    )
    if not sol.success or sol.t[-1] != float(z):
        raise GeometryDegenerateError(
            f"focal point before z={z:g}", focal_distance=float(sol.t[-1])
        )
    u = sol.y[:npts, -1].reshape(shape)
    s = sol.y[npts:, -1].reshape(shape)
    return LeafGeometry(
        z=float(z),
        conformal=np.exp(2.0 * u),
        sff_scalar=s,
        mean_curvature=d * s,
    )


# ---------------------------------------------------------------------------
# graphs over the base


@dataclass
class GraphSurface:
    """Normal graph {z = f(y)} inside the chart of a warped metric."""

    f: np.ndarray
    metric: WarpedMetric

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float) * np.ones(self.metric.base.shape)
        if not np.all(np.isfinite(self.f)):
            raise ValueError("graph heights must be finite")
        lo, hi = self.metric.z_range
        if np.min(self.f) < lo or np.max(self.f) > hi:
            raise OutOfChartError("graph exits the Fermi chart")


def _graph_terms(metric: WarpedMetric, f: np.ndarray):
    base = metric.base
    d = base.dim
    c_f = metric.conformal(f)
    grads = [base.deriv(f, a, 1) for a in range(d)]
    q = sum(g**2 for g in grads) / c_f
    root = np.sqrt(1.0 + q)
    return c_f, grads, q, root


def graph_mean_curvature(metric: WarpedMetric, surface: GraphSurface) -> np.ndarray:
    """Mean curvature of the graph, upward-normal convention.

    H[f] = -div_{g_f}( grad_{g_f} f / sqrt(1+|grad f|^2) )
           - sff_f(grad f, grad f)/sqrt(1+|grad f|^2)
           + sqrt(1+|grad f|^2) H_f,
    with every z-dependent coefficient evaluated at z = f(y).
    """
    base = metric.base
    d = base.dim
    f = surface.f
    c_f, grads, q, root = _graph_terms(metric, f)
    sigma_f = metric.shape_scalar(f)
    div = np.zeros_like(f)
    for a in range(d):
        flux = c_f ** (d / 2.0 - 1.0) * grads[a] / root
        div += base.deriv(flux, a, 1)
    div /= c_f ** (d / 2.0)
    return -div - sigma_f * q / root + root * d * sigma_f


def graph_area(metric: WarpedMetric, surface: GraphSurface) -> float:
    """Induced area of the graph: int sqrt(1 + |grad f|^2_{g_f}) dmu_{g_f}."""
    f = surface.f
    c_f, _, _, root = _graph_terms(metric, f)
    return metric.base.integrate_flat(root * c_f ** (metric.base.dim / 2.0))


def quad_error(metric: WarpedMetric, surface: GraphSurface) -> np.ndarray:
    """Quadratic remainder of the mean-curvature expansion around z = 0.

    Adds back the divergence term (conjugated to the z = 0 volume) and the
    linearized zeroth-order terms; what is left is pointwise O(|f|^2 +
    |grad f|^2).
    """
    base = metric.base
    d = base.dim
    f = surface.f
    c_f, grads, q, root = _graph_terms(metric, f)
    h_of_f = graph_mean_curvature(metric, surface)
    h0 = metric.mean_curvature_leaf(0.0)
    div = np.zeros_like(f)
    for a in range(d):
        flux = c_f ** (d / 2.0 - 1.0) * grads[a] / root
        div += base.deriv(flux, a, 1)
    div /= c_f ** (d / 2.0)
    return h_of_f - h0 + div + metric.jacobi_potential() * f


# ---------------------------------------------------------------------------
# Jacobi operator on the base leaf


@dataclass
class JacobiOperator:
    """f -> -Lap_{g0} f - (|sff_Sigma|^2 + Ric(dz,dz)) f on the z = 0 leaf."""

    metric: WarpedMetric
    potential: np.ndarray = field(init=False)

    def __post_init__(self):
        self.potential = self.metric.jacobi_potential()

    def laplace_beltrami(self, f: np.ndarray) -> np.ndarray:
        base = self.metric.base
        d = base.dim
        c0 = self.metric.conformal(0.0)
        out = np.zeros_like(f)
        for a in range(d):
            out += base.deriv(c0 ** (d / 2.0 - 1.0) * base.deriv(f, a, 1), a, 1)
        return out / c0 ** (d / 2.0)

    def apply(self, f: np.ndarray) -> np.ndarray:
        return -self.laplace_beltrami(f) - self.potential * f

    def nondegeneracy_constant(self, n_modes: int = 12) -> float:
        """min over a trig/polynomial test basis of int (Jf)^2 / int f^2."""
        base = self.metric.base
        if base.dim != 1:
            raise NotImplementedError("test basis shipped for 1-d bases")
        y = base.axis_nodes(0)
        length = base.lengths[0]
        vol = self.metric.volume_element(0.0)
        best = np.inf
        for k in range(n_modes):
            if base.periodic[0]:
                cands = [np.cos(2 * np.pi * (k) * y / length), np.sin(2 * np.pi * (k + 1) * y / length)]
            else:
                cands = [np.sin(np.pi * (k + 1) * y / length)]
            for f in cands:
                nrm = base.integrate_flat(f**2 * vol)
                if nrm < 1e-14:
                    continue
                jf = self.apply(f)
                best = min(best, base.integrate_flat(jf**2 * vol) / nrm)
        return float(best)


def jacobi_operator(metric: WarpedMetric) -> JacobiOperator:
    return JacobiOperator(metric=metric)


# ---------------------------------------------------------------------------
# minimal graphs and foliations


def minimal_graph(
    metric: WarpedMetric,
    boundary: tuple,
    t: float = 0.0,
    f0: np.ndarray | None = None,
    tol: float = 1e-11,
    max_iter: int = 30,
) -> GraphSurface:
    """Newton-solve H[f] = 0 over an interval base with Dirichlet ends.

    boundary = (left, right) heights; the graph is pinned at boundary + t.
    """
    base = metric.base
    if base.dim != 1 or base.periodic[0]:
        raise ValueError("minimal_graph needs an interval base")
    n = base.shape[0]
    lo, hi = float(boundary[0]) + t, float(boundary[1]) + t
    f = np.linspace(lo, hi, n) if f0 is None else np.asarray(f0, dtype=float).copy()
    f[0], f[-1] = lo, hi

    def resid(fv):
        return graph_mean_curvature(metric, GraphSurface(fv, metric))[1:-1]

    last = np.inf
    for _ in range(max_iter):
        r = resid(f)
        last = float(np.max(np.abs(r)))
        if last <= tol:
            return GraphSurface(f, metric)
        jac = np.zeros((n - 2, n - 2))
        step = 1e-7
        for j in range(1, n - 1):
            fp = f.copy()
            fp[j] += step
            jac[:, j - 1] = (resid(fp) - r) / step
        try:
            delta = np.linalg.solve(jac, r)
        except np.linalg.LinAlgError as exc:
            raise NumericFailure("singular Newton system in minimal_graph", achieved=last) from exc
        f[1:-1] -= delta
    raise NumericFailure("minimal_graph Newton did not converge", achieved=last)


def minimal_foliation(metric: WarpedMetric, boundary: tuple, t_values) -> list:
    """Minimal graphs for each t; raises if the leaves fail to order strictly."""
    leaves = [minimal_graph(metric, boundary, t=float(t)) for t in sorted(t_values)]
    for a, b in zip(leaves, leaves[1:]):
        if not np.all(b.f - a.f > 0):
            raise FoliationOrderError("minimal graphs cross: foliation property violated")
    return leaves


def resolve_metric(config: dict) -> WarpedMetric:
    """Build a shipped metric family from a config table.

    kinds: flat-product {base: circle|interval|torus, length(s), n, z_range},
    circle {radius, n, z_range}, synthetic {potential const or Fourier
    coefficients [c0, c1, s1, ...], cubic likewise, base fields, z_range}.
    """
    kind = config.get("kind", "flat-product")
    z_range = tuple(config.get("z_range", (-1.0, 1.0)))
    if kind == "circle":
        return circle_ambient(config.get("radius", 1.0), z_range, n=config.get("n", 128))
    base_kind = config.get("base", "circle")
    n = config.get("n", 64)
    length = config.get("length", 2.0 * np.pi)
    if base_kind == "circle":
        base = BaseGrid.circle(length, n)
    elif base_kind == "interval":
        base = BaseGrid.interval(length, n)
    elif base_kind == "torus":
        base = BaseGrid.torus(config.get("lengths", (length, length)), config.get("shape", (n, n)))
    else:
        raise ValueError(f"unknown base kind {base_kind!r}")
    if kind == "flat-product":
        return flat_product(base, z_range)
    if kind == "synthetic":
        def fourier(coefs):
            coefs = list(np.atleast_1d(coefs))
            def fn(y, *rest):
                out = coefs[0] * np.ones_like(y)
                for k in range(1, (len(coefs) + 1) // 2 + 1):
                    if 2 * k - 1 < len(coefs):
                        out = out + coefs[2 * k - 1] * np.cos(2 * np.pi * k * y / length)
                    if 2 * k < len(coefs):
                        out = out + coefs[2 * k] * np.sin(2 * np.pi * k * y / length)
                return out
            return fn
        return synthetic_potential(
            base,
            fourier(config.get("potential", 1.0)),
            z_range=z_range,
            cubic=fourier(config.get("cubic", 0.0)),
            label=config.get("label", "synthetic"),
        )
    raise ValueError(f"unknown metric kind {kind!r}")


def export_geometry_csv(path, metric: WarpedMetric, z_samples):
    """Dump (y, z, H_z, |sff_z|^2) rows for the plotting component."""
    import csv as _csv

    if metric.base.dim != 1:
        raise NotImplementedError("CSV dump shipped for 1-d bases")
    y = metric.base.axis_nodes(0)
    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["y", "z", "H_z", "sff_sq"])
        for z in z_samples:
            hz = metric.mean_curvature_leaf(z)
            s2 = metric.sff_norm2(z)
            for i in range(len(y)):
                w.writerow([f"{y[i]:.17g}", f"{z:.17g}", f"{hz[i]:.17g}", f"{s2[i]:.17g}"])
