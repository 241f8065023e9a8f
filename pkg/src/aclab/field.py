"""Phase-field critical points and layer analysis on warped-product domains.

Fields live on tensor grids (base) x (z window). The discrete energy is a
finite-volume form of int eps |grad u|^2 / 2 + W(u)/eps with the metric
volume weights, so the assembled stiffness/mass pair is symmetric and the
residual, Newton linearization, descent flow, and second variation all
derive from one discretization. The z direction is periodic or carries
pinned far-field values; base axes follow the base grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from aclab.errors import (
    DegenerateGradientError,
    NodalTopologyError,
    NumericFailure,
    StepSizeError,
)
from aclab.geometry import GraphSurface, WarpedMetric, graph_area
from aclab.profile import Profile, truncate
from aclab.wells import eval_w

MAX_PRINCIPLE_SLACK = 1e-6
MIN_NODES_PER_EPS = 8


# ---------------------------------------------------------------------------
# discretization


class FieldDiscretization:
    """Symmetric finite-volume operators for one (metric, grid, eps) triple.

    mass: lumped metric volume per node (flattened).
    stiffness: K with u^T K u = int |grad u|^2_g dmu_g (flat-index CSR).
    Dirichlet axes pin their boundary nodes; `interior` masks free dofs.
    """

    def __init__(self, metric: WarpedMetric, epsilon: float, z_nodes: np.ndarray, z_periodic: bool):
        base = metric.base
        self.metric = metric
        self.epsilon = float(epsilon)
        self.z_nodes = np.asarray(z_nodes, dtype=float)
        self.z_periodic = bool(z_periodic)
        self.base = base
        nz = len(self.z_nodes)
        hz = self.z_nodes[1] - self.z_nodes[0]
        if z_periodic:
            span = hz * nz
        else:
            span = self.z_nodes[-1] - self.z_nodes[0]
        if hz > epsilon / MIN_NODES_PER_EPS + 1e-13:
            raise ValueError(
                f"z spacing {hz:.4g} does not resolve eps={epsilon:g} "
                f"(need >= {MIN_NODES_PER_EPS} nodes per eps)"
            )
        self.hz = float(hz)
        self.shape = tuple(base.shape) + (nz,)
        self.n = int(np.prod(self.shape))

        # per-axis 1-d weights (trapezoid on pinned axes)
        axis_w = []
        for a in range(base.dim):
            n = base.shape[a]
            w = np.full(n, base.spacing(a))
            if not base.periodic[a]:
                w[0] = w[-1] = base.spacing(a) / 2
            axis_w.append(w)
        wz = np.full(nz, hz)
        if not z_periodic:
            wz[0] = wz[-1] = hz / 2
        axis_w.append(wz)
        self.axis_weights = axis_w

        cell = np.array(1.0)
        for a, w in enumerate(axis_w):
            sh = [1] * (base.dim + 1)
            sh[a] = len(w)
            cell = cell * w.reshape(sh)
        w_field, _, _ = metric.warp_fields(self.z_nodes)
        conf = w_field**2
        self.conformal = conf
        self.volume = conf ** (base.dim / 2.0) * cell
        self.mass = self.volume.ravel()

        self.stiffness = self._assemble_stiffness()
        self.interior = self._interior_mask()

    # -- assembly ---------------------------------------------------------
    def _edge_pairs(self, axis, periodic):
        idx = np.arange(self.n).reshape(self.shape)
        left = np.moveaxis(idx, axis, 0)
        if periodic:
            i = left.reshape(self.shape[axis], -1)
            j = np.roll(left, -1, axis=0).reshape(self.shape[axis], -1)
            return i.ravel(), j.ravel()
        i = left[:-1].reshape(-1)
        j = left[1:].reshape(-1)
        return i, j

    def _assemble_stiffness(self):
        base = self.base
        d = base.dim
        nz = len(self.z_nodes)
        rows, cols, vals = [], [], []

        def conformal_at(mesh_axes, z_vals):
            shp = tuple(len(ax) for ax in mesh_axes) + (len(z_vals),)
            grids = np.meshgrid(*mesh_axes, indexing="ij")
            grids = [g[..., None] * np.ones(shp) for g in grids]
            zz = z_vals.reshape((1,) * d + (len(z_vals),)) * np.ones(shp)
            return self.metric.warp(tuple(grids), zz) ** 2

        def transverse_weight(skip_axis):
            w = np.array(1.0)
            for a, wa in enumerate(self.axis_weights):
                if a == skip_axis:
                    continue
                sh = [1] * (d + 1)
                sh[a] = len(wa)
                w = w * wa.reshape(sh)
            return w

        # base-axis edges: coefficient sqrt(g) g^{aa} = c^{d/2 - 1}
        for a in range(d):
            h = base.spacing(a)
            mesh_axes = [base.axis_nodes(k) for k in range(d)]
            if base.periodic[a]:
                mesh_axes[a] = mesh_axes[a] + h / 2
            else:
                mesh_axes[a] = (mesh_axes[a][:-1] + mesh_axes[a][1:]) / 2
            c_mid = conformal_at(mesh_axes, self.z_nodes)
            coef = c_mid ** (d / 2.0 - 1.0) * transverse_weight(a) / h
            i, j = self._edge_pairs(a, base.periodic[a])
            w_flat = np.moveaxis(coef, a, 0).reshape(-1)
            rows.append(i), cols.append(j), vals.append(w_flat)

        # z edges: coefficient sqrt(g) = c^{d/2}
        mesh_axes = [base.axis_nodes(k) for k in range(d)]
        if self.z_periodic:
            zmid = self.z_nodes + self.hz / 2
        else:
            zmid = (self.z_nodes[:-1] + self.z_nodes[1:]) / 2
        c_mid = conformal_at(mesh_axes, zmid)
        coef = c_mid ** (d / 2.0) * transverse_weight(d) / self.hz
        i, j = self._edge_pairs(d, self.z_periodic)
        w_flat = np.moveaxis(coef, d, 0).reshape(-1)
        rows.append(i), cols.append(j), vals.append(w_flat)

        i = np.concatenate(rows)
        j = np.concatenate(cols)
        w = np.concatenate(vals)
        K = sparse.coo_matrix(
            (np.concatenate([w, w, -w, -w]), (np.concatenate([i, j, i, j]), np.concatenate([i, j, j, i]))),
            shape=(self.n, self.n),
        )
        return K.tocsr()

    def _interior_mask(self):
        mask = np.ones(self.shape, dtype=bool)
        for a in range(self.base.dim):
            if not self.base.periodic[a]:
                sel = [slice(None)] * (self.base.dim + 1)
                sel[a] = 0
                mask[tuple(sel)] = False
                sel[a] = -1
                mask[tuple(sel)] = False
        if not self.z_periodic:
            mask[..., 0] = False
            mask[..., -1] = False
        return mask.ravel()

    # -- operator actions ---------------------------------------------------
    def laplacian(self, u: np.ndarray) -> np.ndarray:
        """Discrete Laplace-Beltrami (rows at pinned nodes are meaningless)."""
        return (-(self.stiffness @ u.ravel()) / self.mass).reshape(self.shape)

    def gradient_energy(self, u: np.ndarray) -> float:
        uf = u.ravel()
        return float(uf @ (self.stiffness @ uf))


@dataclass
class PhaseField:
    """Discretized order parameter with its metric, eps, and grid."""

    disc: FieldDiscretization
    u: np.ndarray
    well: object

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float).reshape(self.disc.shape)
        if np.max(np.abs(self.u)) > 1.0 + MAX_PRINCIPLE_SLACK:
            raise ValueError("field violates the maximum-principle slack |u| <= 1 + 1e-6")

    @property
    def epsilon(self) -> float:
        return self.disc.epsilon

    @property
    def metric(self) -> WarpedMetric:
        return self.disc.metric

    def copy_with(self, u: np.ndarray) -> "PhaseField":
        return PhaseField(disc=self.disc, u=u, well=self.well)


def make_z_grid(z_span, epsilon, points_per_eps=MIN_NODES_PER_EPS, periodic=False):
    lo, hi = z_span
    length = hi - lo
    n = int(np.ceil(length * points_per_eps / epsilon))
    if periodic:
        return lo + length * np.arange(n) / n
    return np.linspace(lo, hi, n + 1)


# ---------------------------------------------------------------------------
# energy / residual / mass


def energy(fld: PhaseField) -> float:
    """E = int eps |grad u|^2 / 2 + W(u)/eps, metric volume form."""
    eps = fld.epsilon
    grad = 0.5 * eps * fld.disc.gradient_energy(fld.u)
    pot = float(np.sum(eval_w(fld.well, 0, fld.u).ravel() * fld.disc.mass)) / eps
    return grad + pot


def residual(fld: PhaseField) -> np.ndarray:
    """eps^2 Lap_g u - W'(u) as a grid function (zero at pinned nodes)."""
    eps = fld.epsilon
    r = eps**2 * fld.disc.laplacian(fld.u) - eval_w(fld.well, 1, fld.u)
    rf = r.reshape(-1)
    rf[~fld.disc.interior] = 0.0
    return rf.reshape(fld.disc.shape)


def varifold_mass(fld: PhaseField, h0: float) -> float:
    """h0^{-1} int eps |grad u|^2 dmu_g."""
    return fld.epsilon * fld.disc.gradient_energy(fld.u) / h0


# ---------------------------------------------------------------------------
# solvers


def gradient_flow(fld: PhaseField, dt: float, steps: int, energy_slack: float = 1e-12):
    """Semi-implicit descent: implicit stiffness, explicit W' splitting.

    Returns (field, energy_trace). The stable step bound eps / sup|W''|
    over the invariant range is enforced loosely and reported via the
    trace; an energy increase beyond slack raises StepSizeError.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    disc = fld.disc
    eps = fld.epsilon
    free = disc.interior
    Mv = disc.mass
    A = sparse.diags(Mv) + dt * eps * disc.stiffness
    lu = splu(A[free][:, free].tocsc())
    u = fld.u.ravel().copy()
    trace = [energy(fld)]
    for _ in range(steps):
        rhs = Mv * (u - dt * eval_w(fld.well, 1, u) / eps)
        rhs_free = rhs[free] - A[free][:, ~free] @ u[~free]
        u_new = u.copy()
        u_new[free] = lu.solve(rhs_free)
        cand = fld.copy_with(np.clip(u_new, -1 - MAX_PRINCIPLE_SLACK, 1 + MAX_PRINCIPLE_SLACK))
        e_new = energy(cand)
        if e_new > trace[-1] + energy_slack * (1.0 + abs(trace[-1])):
            raise StepSizeError(
                f"energy increased by {e_new - trace[-1]:.3e}; reduce dt below ~eps/3"
            )
        u = cand.u.ravel()
        trace.append(e_new)
    return fld.copy_with(u), np.array(trace)


def newton_solve(fld: PhaseField, tol: float = 1e-10, max_iter: int = 40):
    """Refine to a critical point: residual sup-norm <= tol.

    Linearization eps^2 Lap - W''(u), solved with a sparse LU on the
    symmetric form (the operator is indefinite near layered states, so
    a direct factorization replaces gradient-based linear solvers).
    Returns (field, history of sup-residuals).
    """
    disc = fld.disc
    eps = fld.epsilon
    free = disc.interior
    Mv = disc.mass
    u = fld.u.ravel().copy()
    history = []
    for it in range(max_iter):
        cur = fld.copy_with(u)
        r = residual(cur).ravel()
        sup = float(np.max(np.abs(r)))
        history.append(sup)
        if sup <= tol:
            out = fld.copy_with(u)
            return out, history
        if it >= 3 and history[-1] > 0.9 * history[-4] and history[-1] > 1e3 * tol:
            raise NumericFailure("Newton stagnated", achieved=sup, trace=history)
        w2 = eval_w(fld.well, 2, u)
        A = eps**2 * disc.stiffness + sparse.diags(Mv * w2)
        rhs = (Mv * r)[free]
        try:
            delta = splu(A[free][:, free].tocsc()).solve(rhs)
        except RuntimeError as exc:
            raise NumericFailure("singular Newton system", achieved=sup, trace=history) from exc
        step = np.zeros_like(u)
        step[free] = delta
        # backtracking on the residual norm: soft near-translation modes can
        # otherwise throw the first iterates out of the quadratic basin
        accepted = False
        scale = 1.0
        for _ in range(12):
            cand = np.clip(u + scale * step, -1.0 - MAX_PRINCIPLE_SLACK, 1.0 + MAX_PRINCIPLE_SLACK)
            r_new = residual(fld.copy_with(cand)).ravel()
            if np.max(np.abs(r_new)) <= max((1.0 - 0.2 * scale) * sup, tol):
                u = cand
                accepted = True
                break
            scale /= 2.0
        if not accepted:
            u = np.clip(u + step, -1.0 - MAX_PRINCIPLE_SLACK, 1.0 + MAX_PRINCIPLE_SLACK)
    raise NumericFailure("Newton did not converge", achieved=history[-1], trace=history)


# ---------------------------------------------------------------------------
# layers


@dataclass
class LayerStack:
    """Ordered nodal graphs with offsets, gaps, and the ansatz discrepancy."""

    sheets: list
    epsilon: float
    offsets: list | None = None
    phi: np.ndarray | None = None
    min_gaps: list | None = None
    c1_norms: list | None = None
    phi_sup: float | None = None
    orth_residual: float | None = None

    @property
    def q(self) -> int:
        return len(self.sheets)

    def gaps(self):
        return [b - a for a, b in zip(self.sheets, self.sheets[1:])]


def nodal_layers(fld: PhaseField) -> LayerStack:
    """Extract the zero set as ordered graphs by per-column root refinement.

    Each base column must carry the same number of transversal sign
    changes; local cubic interpolation refines every crossing.
    """
    disc = fld.disc
    u = fld.u.reshape(-1, disc.shape[-1])  # columns x z
    z = disc.z_nodes
    nz = len(z)
    ncol = u.shape[0]
    crossings = []
    for cidx in range(ncol):
        col = u[cidx]
        roots = []
        rng = range(nz) if disc.z_periodic else range(nz - 1)
        for i in rng:
            j = (i + 1) % nz
            a, b = col[i], col[j]
            if a == 0.0:
                roots.append(z[i])
                continue
            if a * b < 0.0:
                i0 = np.arange(i - 1, i + 3)
                if not disc.z_periodic:
                    i0 = np.clip(i0, 0, nz - 1)
                zi = z[i] + (i0 - i) * disc.hz
                vals = col[i0 % nz]
                coef = np.polyfit(zi - z[i], vals, 3)
                lo, hi = 0.0, disc.hz
                flo = np.polyval(coef, lo)
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    fm = np.polyval(coef, mid)
                    if flo * fm <= 0:
                        hi = mid
                    else:
                        lo, flo = mid, fm
                roots.append(z[i] + 0.5 * (lo + hi))
        crossings.append(roots)
    counts = {len(r) for r in crossings}
    if len(counts) != 1:
        raise NodalTopologyError(f"ambiguous nodal graph: crossing counts {sorted(counts)}")
    q = counts.pop()
    if q == 0:
        return LayerStack(sheets=[], epsilon=fld.epsilon)
    sheets = [
        np.array([crossings[c][l] for c in range(ncol)]).reshape(disc.base.shape)
        for l in range(q)
    ]
    for a, b in zip(sheets, sheets[1:]):
        if not np.all(b > a):
            raise NodalTopologyError("extracted sheets are not strictly ordered")
    min_gaps = _min_neighbor_gaps(sheets, disc)
    c1 = []
    for f in sheets:
        grads = [disc.base.deriv(f, a, 1) for a in range(disc.base.dim)]
        c1.append(float(np.max(np.abs(f)) + max(np.max(np.abs(g)) for g in grads)))
    return LayerStack(sheets=sheets, epsilon=fld.epsilon, min_gaps=min_gaps, c1_norms=c1)


def _min_neighbor_gaps(sheets, disc):
    q = len(sheets)
    if q == 0:
        return []
    gaps = []
    span = disc.hz * len(disc.z_nodes) if disc.z_periodic else None
    for l in range(q):
        cands = []
        if l > 0:
            cands.append(np.min(sheets[l] - sheets[l - 1]))
        if l < q - 1:
            cands.append(np.min(sheets[l + 1] - sheets[l]))
        if disc.z_periodic and q >= 2:
            wrap = np.min(sheets[0] + span - sheets[-1])
            if l in (0, q - 1):
                cands.append(wrap)
        if disc.z_periodic and q == 1:
            cands.append(span)
        gaps.append(float(min(cands)) if cands else np.inf)
    return gaps


# ---------------------------------------------------------------------------
# superposed-profile ansatz


def signed_distance(metric: WarpedMetric, sheet: np.ndarray, mesh_z: np.ndarray) -> np.ndarray:
    """Signed distance from the graph of `sheet`, positive above.

    Exact for constant sheets (g_zz = 1 makes vertical lines unit-speed
    geodesics). For product metrics the Euclidean polyline distance is
    exact; otherwise the vertical distance is used and the tilt-induced
    gap is the caller's diagnostic burden.
    """
    base = metric.base
    f = np.asarray(sheet, dtype=float) * np.ones(base.shape)
    vert = mesh_z - f[..., None]
    if np.ptp(f) == 0.0:
        return vert
    is_product = np.ptp(metric.conformal((metric.z_range[0] + metric.z_range[1]) / 2)) == 0.0 and np.ptp(
        metric.conformal(0.0)
    ) == 0.0 and abs(float(np.max(metric.conformal(0.0))) - 1.0) < 1e-14
    if not (is_product and base.dim == 1):
        return vert
    # exact distance to the polyline graph in the flat plane
    y = base.axis_nodes(0)
    length = base.lengths[0]
    ys = np.concatenate([y, [length]]) if base.periodic[0] else y
    fs = np.concatenate([f, [f[0]]]) if base.periodic[0] else f
    py, pz = ys, fs
    seg_y0, seg_z0 = py[:-1], pz[:-1]
    seg_dy, seg_dz = np.diff(py), np.diff(pz)
    norm2 = seg_dy**2 + seg_dz**2
    ny_, nzz = base.shape[0], mesh_z.shape[-1]
    yy = np.broadcast_to(y[:, None], (ny_, nzz))
    zz = np.broadcast_to(mesh_z, (ny_, nzz)) if mesh_z.ndim == 1 else mesh_z
    best = np.full((ny_, nzz), np.inf)
    shifts = (-length, 0.0, length) if base.periodic[0] else (0.0,)
    for shift in shifts:
        for s in range(len(seg_y0)):
            t = ((yy - (seg_y0[s] + shift)) * seg_dy[s] + (zz - seg_z0[s]) * seg_dz[s]) / norm2[s]
            t = np.clip(t, 0.0, 1.0)
            dy = yy - (seg_y0[s] + shift) - t * seg_dy[s]
            dz = zz - seg_z0[s] - t * seg_dz[s]
            best = np.minimum(best, dy**2 + dz**2)
    return np.sign(vert) * np.sqrt(best)


def superpose(
    metric: WarpedMetric,
    profile: Profile,
    epsilon: float,
    sheets: Sequence[np.ndarray],
    offsets: Sequence | None = None,
    z_nodes: np.ndarray | None = None,
    z_periodic: bool = False,
    well=None,
    points_per_eps: int = 12,
    min_separation_factor: float = 4.0,
) -> PhaseField:
    """Build the superposed-profile approximate critical point.

    u = ((-1)^{Q+1} - 1)/2 + sum_l Hbar^{3|log eps|}((-1)^{l-1} (d_l - h_l)/eps)
    with d_l the signed distance from sheet l. Sheets must be ordered and
    separated by at least 4 eps.
    """
    q = len(sheets)
    if q == 0:
        raise ValueError("need at least one sheet")
    base = metric.base
    sheets = [np.asarray(f, dtype=float) * np.ones(base.shape) for f in sheets]
    if offsets is None:
        offsets = [np.zeros(base.shape) for _ in sheets]
    offsets = [np.asarray(h, dtype=float) * np.ones(base.shape) for h in offsets]
    for a, b in zip(sheets, sheets[1:]):
        if np.min(b - a) < min_separation_factor * epsilon:
            raise ValueError("sheets closer than the minimum separation")
    if z_nodes is None:
        z_nodes = make_z_grid(metric.z_range, epsilon, points_per_eps, periodic=z_periodic)
    disc = FieldDiscretization(metric, epsilon, z_nodes, z_periodic)
    if z_periodic and q >= 2:
        span = disc.hz * len(z_nodes)
        if np.min(sheets[0] + span - sheets[-1]) < min_separation_factor * epsilon:
            raise ValueError("wrap-around sheets closer than the minimum separation")

    if z_periodic and q % 2 == 1:
        raise ValueError("odd sheet counts cannot close up on a periodic z circle")
    lam = 3.0 * abs(np.log(epsilon))
    tprof = truncate(profile, lam)  # raises if the profile table is too short
    if z_periodic:
        # every profile must reach its exact far-field value at the seam,
        # otherwise the ansatz fails to close up periodically
        span = disc.hz * len(z_nodes)
        seam = z_nodes[0]
        below = float(np.min(sheets[0])) - seam
        above = seam + span - float(np.max(sheets[-1]))
        if min(below, above) < 2.0 * lam * epsilon:
            raise ValueError("sheets too close to the periodic seam for the truncation window")
    u = np.full(disc.shape, ((-1.0) ** (q + 1) - 1.0) / 2.0)
    for l, (f, h) in enumerate(zip(sheets, offsets)):
        d = signed_distance(metric, f, z_nodes)
        arg = (-1.0) ** l * (d - h[..., None]) / epsilon
        u += tprof.eval(arg)
    w = well if well is not None else profile.well
    return PhaseField(disc=disc, u=np.clip(u, -1.0, 1.0), well=w)


def ansatz_residual(
    metric: WarpedMetric,
    profile: Profile,
    epsilon: float,
    sheets: Sequence[np.ndarray],
    z_samples: np.ndarray,
) -> float:
    """Sup of the continuum residual of the flat-sheet ansatz.

    For constant sheets in a product metric the residual reduces to the
    truncation defect of Hbar, evaluated in closed form (no grid noise).
    """
    lam = 3.0 * abs(np.log(epsilon))
    tprof = truncate(profile, lam)
    well = profile.well
    worst = 0.0
    q = len(sheets)
    for z in z_samples:
        u = ((-1.0) ** (q + 1) - 1.0) / 2.0
        d2 = 0.0
        for l, f in enumerate(sheets):
            arg = (-1.0) ** l * (z - float(np.max(f))) / epsilon
            u = u + tprof.eval(arg)
            d2 = d2 + tprof.eval(arg, 2) / epsilon**2
        r = epsilon**2 * d2 - eval_w(well, 1, u)
        worst = max(worst, abs(float(r)))
    return worst


def fit_offsets(
    fld: PhaseField, stack: LayerStack, profile: Profile, tol: float = 1e-12, sweeps: int = 3
) -> LayerStack:
    """Fit per-sheet vertical offsets by the profile-derivative orthogonality.

    For each sheet and base point, solves
    int (u - U[h]) dz(Hbar_l) dz = 0 for h_l by a damped scalar Newton,
    vectorized over base points and swept over sheets (the cross-sheet
    coupling decays with the separation). The discrepancy phi = u - U[h]
    and the residual of the defining relation land on the returned stack.
    """
    disc = fld.disc
    eps = fld.epsilon
    base = disc.base
    z = disc.z_nodes
    lam = 3.0 * abs(np.log(eps))
    tprof = truncate(profile, lam)
    wz = disc.axis_weights[-1]
    sheets = stack.sheets
    q = len(sheets)
    dists = [signed_distance(fld.metric, f, z) for f in sheets]
    offsets = [np.zeros(base.shape) for _ in range(q)]

    def layer_term(l, k=0):
        arg = (-1.0) ** l * (dists[l] - offsets[l][..., None]) / eps
        return tprof.eval(arg, k)

    def build_u():
        u = np.full(disc.shape, ((-1.0) ** (q + 1) - 1.0) / 2.0)
        for l in range(q):
            u += layer_term(l)
        return u

    g = None
    for _ in range(sweeps):
        for l in range(q):
            sign = (-1.0) ** l
            for _ in range(40):
                diff = fld.u - build_u()
                w1 = layer_term(l, 1)
                wgt = w1 * (sign / eps)
                g = np.sum(diff * wgt * wz, axis=-1)
                if np.max(np.abs(g)) <= tol:
                    break
                # dG/dh = sum [ Hbar'^2 - (u - U) Hbar'' ] wz / eps^2
                w2 = layer_term(l, 2)
                slope = np.sum((w1**2 - diff * w2) * wz, axis=-1) / eps**2
                if np.any(np.abs(slope) < 1e-14):
                    raise NumericFailure(
                        "offset fit: degenerate slope at a base column",
                        achieved=float(np.min(np.abs(slope))),
                    )
                step = np.clip(g / slope, -0.5 * eps, 0.5 * eps)
                offsets[l] = offsets[l] - step
            else:
                raise NumericFailure(
                    "offset fit Newton did not converge",
                    achieved=float(np.max(np.abs(g))),
                )
    u_fit = build_u()
    orth = 0.0
    for l in range(q):
        wgt = layer_term(l, 1) * ((-1.0) ** l / eps)
        gl = np.sum((fld.u - u_fit) * wgt * wz, axis=-1)
        orth = max(orth, float(np.max(np.abs(gl))))
    phi = fld.u - u_fit
    return LayerStack(
        sheets=sheets,
        epsilon=eps,
        offsets=offsets,
        phi=phi,
        min_gaps=stack.min_gaps,
        c1_norms=stack.c1_norms,
        phi_sup=float(np.max(np.abs(phi))),
        orth_residual=orth,
    )


def nodal_measure(fld: PhaseField, stack: LayerStack) -> float:
    """Total induced measure (length/area) of the nodal sheets."""
    return sum(
        graph_area(fld.metric, GraphSurface(f, fld.metric)) for f in stack.sheets
    )


# ---------------------------------------------------------------------------
# enhanced second fundamental form


def enhanced_sff(fld: PhaseField, beta: float = 0.1, grad_floor: float = 1e-8, y_margin: float = 0.0):
    """Samples of the level-set curvature tensor norm on {|u| <= 1 - beta}.

    Returns (|A| samples, sup, mask, level-set curvature samples). The
    tensor is (Hess u - Hess u(., nu) x nu)/|grad u| with the covariant
    Hessian of the warped metric; |A| dominates the level-set curvature.
    y_margin drops a fraction of the base width at pinned lateral ends,
    where boundary-layer kinks are not bulk curvature.
    """
    disc = fld.disc
    base = disc.base
    if base.dim != 1:
        raise NotImplementedError("enhanced curvature shipped for 1-d bases")
    u = fld.u
    z = disc.z_nodes
    hz = disc.hz

    def dz(arr, order=1):
        if disc.z_periodic:
            n = arr.shape[-1]
            k = 2 * np.pi * np.fft.fftfreq(n, d=hz)
            if order == 1 and n % 2 == 0:
                k = k.copy()
                k[n // 2] = 0.0
            return np.real(np.fft.ifft(np.fft.fft(arr, axis=-1) * (1j * k) ** order, axis=-1))
        if order == 1:
            return np.gradient(arr, hz, axis=-1, edge_order=2)
        out = np.empty_like(arr)
        out[..., 1:-1] = (arr[..., 2:] - 2 * arr[..., 1:-1] + arr[..., :-2]) / hz**2
        out[..., 0] = out[..., 1]
        out[..., -1] = out[..., -2]
        return out

    dy = lambda arr: base.deriv(arr, 0, 1)
    u_y = dy(u)
    u_z = dz(u)
    u_yy = base.deriv(u, 0, 2)
    u_zz = dz(u, 2)
    u_yz = dz(u_y)

    c = disc.conformal
    w, w_z, _ = fld.metric.warp_fields(z)
    c_z = 2.0 * w * w_z
    c_y = dy(c)

    hess_yy = u_yy - (c_y / (2 * c)) * u_y + (c_z / 2.0) * u_z
    hess_yz = u_yz - (c_z / (2 * c)) * u_y
    hess_zz = u_zz

    grad2 = u_y**2 / c + u_z**2
    mask = (np.abs(u) <= 1.0 - beta) & (fld.disc.interior.reshape(disc.shape))
    if y_margin > 0 and not base.periodic[0]:
        m = int(np.ceil(y_margin * base.shape[0]))
        mask[:m] = False
        mask[-m:] = False
    if not np.any(mask):
        raise ValueError("no points with |u| <= 1 - beta")
    gnorm = np.sqrt(np.maximum(grad2, 1e-300))
    if np.min(gnorm[mask]) < grad_floor:
        raise DegenerateGradientError("vanishing gradient on the queried set")

    np_err = np.errstate(invalid="ignore", divide="ignore", over="ignore")
    np_err.__enter__()
    nu_y = u_y / (c * gnorm)  # vector components
    nu_z = u_z / gnorm
    # (Hess(., nu))_mu = Hess_{mu a} nu^a
    hn_y = hess_yy * nu_y + hess_yz * nu_z
    hn_z = hess_yz * nu_y + hess_zz * nu_z
    nu_flat_y = u_y / gnorm  # 1-form components
    nu_flat_z = u_z / gnorm
    # the tensor is not symmetric: the normal-projection acts on one slot
    a_yy = (hess_yy - hn_y * nu_flat_y) / gnorm
    a_yz = (hess_yz - hn_y * nu_flat_z) / gnorm
    a_zy = (hess_yz - hn_z * nu_flat_y) / gnorm
    a_zz = (hess_zz - hn_z * nu_flat_z) / gnorm
    # |A|^2 = g^{ma} g^{nb} A_{mn} A_{ab}, g^{yy} = 1/c, g^{zz} = 1
    norm2 = a_yy**2 / c**2 + (a_yz**2 + a_zy**2) / c + a_zz**2
    a_norm = np.sqrt(np.maximum(norm2, 0.0))

    # level-set curvature: Hess(t,t)/|grad u| with the unit tangent t
    t_y = u_z / (np.sqrt(c) * gnorm)
    t_z = -u_y / (np.sqrt(c) * gnorm)
    kappa = (hess_yy * t_y**2 + 2 * hess_yz * t_y * t_z + hess_zz * t_z**2) / gnorm
    np_err.__exit__(None, None, None)
    return a_norm[mask], float(np.max(a_norm[mask])), mask, kappa[mask]
