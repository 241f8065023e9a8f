"""Second-variation spectra, Morse index, projections, and stability checks.

The second variation of the energy at u acts as zeta -> -eps Lap_g zeta +
W''(u) zeta / eps; its discrete form reuses the field stiffness/mass pair,
so quadratic forms are computed by the operator with exact discrete
integration by parts on periodic grids. Eigenpairs come from shift-invert
Lanczos on the generalized symmetric problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigsh

from aclab.errors import NumericFailure
from aclab.field import LayerStack, PhaseField
from aclab.geometry import WarpedMetric
from aclab.profile import Profile, truncate
from aclab.wells import eval_w

SQRT2 = np.sqrt(2.0)


@dataclass
class SpectrumReport:
    """Lowest eigenvalues with index/nullity classification."""

    eigenvalues: np.ndarray
    index: int
    nullity: int
    zero_tol: float
    residuals: np.ndarray
    solver: str = "shift-invert-lanczos"
    eigenvectors: np.ndarray | None = None

    def to_dict(self):
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "index": int(self.index),
            "nullity": int(self.nullity),
            "zero_tol": float(self.zero_tol),
            "residuals": [float(r) for r in self.residuals],
            "solver": self.solver,
        }


def _classify(eigs, zero_tol):
    index = int(np.sum(eigs < -zero_tol))
    nullity = int(np.sum(np.abs(eigs) <= zero_tol))
    return index, nullity


def second_variation_apply(fld: PhaseField, zeta: np.ndarray) -> np.ndarray:
    """zeta -> -eps Lap_g zeta + W''(u) zeta / eps (pinned rows zeroed)."""
    disc = fld.disc
    eps = fld.epsilon
    out = -eps * disc.laplacian(zeta) + eval_w(fld.well, 2, fld.u) * zeta / eps
    o = out.reshape(-1)
    o[~disc.interior] = 0.0
    return o.reshape(disc.shape)


def quadratic_form(fld: PhaseField, zeta: np.ndarray, xi: np.ndarray | None = None) -> float:
    """Q_u(zeta, xi) = int eps <grad zeta, grad xi> + W''(u) zeta xi / eps."""
    disc = fld.disc
    eps = fld.epsilon
    xi = zeta if xi is None else xi
    zf, xf = zeta.ravel(), xi.ravel()
    grad = eps * float(zf @ (disc.stiffness @ xf))
    pot = float(np.sum(eval_w(fld.well, 2, fld.u).ravel() * zf * xf * disc.mass)) / eps
    return grad + pot


def _second_variation_matrices(fld: PhaseField):
    disc = fld.disc
    eps = fld.epsilon
    w2 = eval_w(fld.well, 2, fld.u).ravel()
    S = eps * disc.stiffness + sparse.diags(disc.mass * w2 / eps)
    return S, disc.mass, disc.interior


def default_zero_tol(epsilon: float) -> float:
    """1e-6 times the spectral scale (the pure-phase gap W''(1)/eps)."""
    return 1e-6 * 2.0 / epsilon


def morse_index(
    fld: PhaseField, k: int = 8, zero_tol: float | None = None, want_vectors: bool = False
) -> SpectrumReport:
    """Lowest-k spectrum of the second variation; index/nullity counts."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if zero_tol is None:
        zero_tol = default_zero_tol(fld.epsilon)
    S, mass, interior = _second_variation_matrices(fld)
    Si = S[interior][:, interior].tocsc()
    Mi = sparse.diags(mass[interior]).tocsc()
    sigma = -1.6 / fld.epsilon  # strictly below min W''/eps
    try:
        vals, vecs = eigsh(Si, k=k, M=Mi, sigma=sigma, which="LM")
    except Exception as exc:  # pragma: no cover - solver failure path
        raise NumericFailure("eigensolver failed", achieved=None) from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    res = []
    for i in range(k):
        v = vecs[:, i]
        r = Si @ v - vals[i] * (Mi @ v)
        res.append(np.linalg.norm(r) / np.linalg.norm(Mi @ v))
    index, nullity = _classify(vals, zero_tol)
    full_vecs = None
    if want_vectors:
        full_vecs = np.zeros((fld.disc.n, k))
        full_vecs[interior] = vecs
    return SpectrumReport(
        eigenvalues=vals,
        index=index,
        nullity=nullity,
        zero_tol=float(zero_tol),
        residuals=np.array(res),
        eigenvectors=full_vecs,
    )


# ---------------------------------------------------------------------------
# surface spectra


def _surface_matrices(metric: WarpedMetric):
    base = metric.base
    if base.dim != 1:
        raise NotImplementedError("surface spectra shipped for 1-d bases")
    n = base.shape[0]
    h = base.spacing(0)
    c0 = metric.conformal(0.0) * np.ones(base.shape)
    vol = c0 ** (base.dim / 2.0) * h * np.ones(n)
    if not base.periodic[0]:
        vol[0] *= 0.5
        vol[-1] *= 0.5
    # stiffness with edge conformal weights c^{d/2-1} (= 1 for d = 1... kept general)
    if base.periodic[0]:
        i = np.arange(n)
        j = (i + 1) % n
    else:
        i = np.arange(n - 1)
        j = i + 1
    w_edge = np.ones(len(i)) / h
    K = sparse.coo_matrix(
        (
            np.concatenate([w_edge, w_edge, -w_edge, -w_edge]),
            (np.concatenate([i, j, i, j]), np.concatenate([i, j, j, i])),
        ),
        shape=(n, n),
    ).tocsr()
    V = metric.jacobi_potential() * np.ones(n)
    return K, vol, V


def _spectral_d2(n: int, length: float) -> np.ndarray:
    """Dense Fourier second-derivative matrix on a uniform periodic grid."""
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)
    eye = np.eye(n)
    return np.real(np.fft.ifft(-(k**2)[:, None] * np.fft.fft(eye, axis=0), axis=0))


def surface_index(metric: WarpedMetric, k: int = 8, zero_tol: float | None = None) -> SpectrumReport:
    """Lowest-k spectrum of the Jacobi operator -Lap_{g0} - V on the base leaf.

    Periodic bases use dense spectral differentiation (kernel modes exact to
    round-off); interval bases (compactly supported variations, Dirichlet)
    use centered stencils with a spacing-aware zero tolerance.
    """
    base = metric.base
    if base.dim != 1:
        raise NotImplementedError("surface spectra shipped for 1-d bases")
    n = base.shape[0]
    V = metric.jacobi_potential() * np.ones(n)
    scale = max(1.0, float(np.max(np.abs(V))))
    c0 = metric.conformal(0.0) * np.ones(n)
    if base.periodic[0] and np.ptp(c0) < 1e-13 and abs(c0[0] - 1.0) < 1e-13:
        d2 = _spectral_d2(n, base.lengths[0])
        sym = -d2 - np.diag(V)
        sym = 0.5 * (sym + sym.T)
        vals = np.linalg.eigvalsh(sym)[:k]
        if zero_tol is None:
            zero_tol = 1e-8 * scale
        solver = "dense-spectral"
    else:
        K, vol, Vfull = _surface_matrices(metric)
        A = K - sparse.diags(vol * Vfull)
        M = sparse.diags(vol)
        if not base.periodic[0]:
            keep = np.zeros(n, dtype=bool)
            keep[1:-1] = True
            A = A[keep][:, keep]
            M = M[keep][:, keep]
        mdiag = M.diagonal()
        sym = A.toarray() / np.sqrt(mdiag)[:, None] / np.sqrt(mdiag)[None, :]
        sym = 0.5 * (sym + sym.T)
        vals = np.linalg.eigvalsh(sym)[:k]
        if zero_tol is None:
            zero_tol = base.spacing(0) ** 2 * scale
        solver = "dense-fd"
    index, nullity = _classify(vals, zero_tol)
    res = np.zeros(len(vals))  # dense solve: residuals at round-off
    return SpectrumReport(
        eigenvalues=vals,
        index=index,
        nullity=nullity,
        zero_tol=float(zero_tol),
        residuals=res,
        solver=solver,
    )


# ---------------------------------------------------------------------------
# profile-lifted quadratic form


def lifted_form(fld: PhaseField, stack: LayerStack, f: np.ndarray, profile: Profile):
    """Compare Q_u on the profile-lifted f with eps^2 h0 times the area form.

    Requires a single sheet. Returns (Q_u(psi,psi), eps^2 h0 Q_Sigma(f,f),
    ratio).
    """
    if stack.q != 1:
        raise ValueError("lifted form needs a multiplicity-one stack")
    disc = fld.disc
    eps = fld.epsilon
    base = disc.base
    sheet = stack.sheets[0]
    offset = stack.offsets[0] if stack.offsets is not None else np.zeros(base.shape)
    lam = 3.0 * abs(np.log(eps))
    tprof = truncate(profile, lam)
    z = disc.z_nodes
    arg = (z[None, :] - (sheet + offset)[..., None]) / eps
    psi = np.asarray(f)[..., None] * tprof.eval(arg, 1)
    psi_flat = psi.reshape(disc.shape)
    q_u = quadratic_form(fld, psi_flat)

    c_sheet = fld.metric.conformal(sheet)
    vol = c_sheet ** (base.dim / 2.0)
    weights = base.quad_weights()
    grads = [base.deriv(np.asarray(f), a, 1) for a in range(base.dim)]
    grad2 = sum(g**2 for g in grads) / c_sheet
    pot = fld.metric.sff_norm2(sheet) + fld.metric.ric_zz(sheet)
    q_sigma = float(np.sum((grad2 - pot * np.asarray(f) ** 2) * vol * weights))
    lifted = eps**2 * profile.h0 * q_sigma
    ratio = q_u / lifted if lifted != 0 else np.inf
    return q_u, lifted, ratio


# ---------------------------------------------------------------------------
# slab projections


class Projector:
    """Profile-derivative projection on a slab Sigma x z window.

    pi(v)(y) = (eps h0)^{-1} int v(y,z) H'(z/eps) dz, normalized with the
    discrete weight norm so that pi(pi_perp(v)) vanishes identically.
    """

    def __init__(self, profile: Profile, epsilon: float, z_nodes: np.ndarray, z_weights: np.ndarray | None = None):
        self.epsilon = float(epsilon)
        self.z_nodes = np.asarray(z_nodes, dtype=float)
        if z_weights is None:
            h = self.z_nodes[1] - self.z_nodes[0]
            z_weights = np.full(len(self.z_nodes), h)
            z_weights[0] = z_weights[-1] = h / 2
        self.z_weights = np.asarray(z_weights, dtype=float)
        self.kernel = profile.eval_dh(self.z_nodes / epsilon)
        self.h0 = profile.h0
        self._norm = float(np.sum(self.kernel**2 * self.z_weights))

    def pi(self, v: np.ndarray) -> np.ndarray:
        """Base function: the profile-derivative component of v."""
        raw = np.sum(v * self.kernel * self.z_weights, axis=-1)
        return raw / self._norm

    def pi_scaled(self, v: np.ndarray) -> np.ndarray:
        """The paper-normalized value (eps h0)^{-1} int v H'(./eps)."""
        return np.sum(v * self.kernel * self.z_weights, axis=-1) / (self.epsilon * self.h0)

    def pi_perp(self, v: np.ndarray) -> np.ndarray:
        return v - self.pi(v)[..., None] * self.kernel


def project(v: np.ndarray, profile: Profile, epsilon: float, z_nodes: np.ndarray):
    """(pi v, pi_perp v) for a slab function; see Projector."""
    p = Projector(profile, epsilon, z_nodes)
    return p.pi(v), p.pi_perp(v)


# ---------------------------------------------------------------------------
# reduced stability inequality


@dataclass
class StabilityCheckResult:
    lhs: float
    rhs: float
    satisfied: bool
    margin: float
    per_sheet: list


def stability_check(
    fld: PhaseField,
    stack: LayerStack,
    zeta: np.ndarray,
    c_prime: float,
    kappa: float = 0.1,
) -> StabilityCheckResult:
    """Test the reduced interaction-vs-gradient inequality on each sheet.

    lhs_l = int zeta^2 [e^{-sqrt2 |d_{l-1}|/eps} + e^{-sqrt2 |d_{l+1}|/eps}]
    rhs   = c' int eps^2 |grad zeta|^2 + |E| int zeta^2, with
    |E| = c' eps^2 + c' sum_m sup e^{-sqrt2 (1+kappa) D_m / eps}.
    """
    if stack.q < 2:
        raise ValueError("stability check needs at least two sheets")
    base = fld.disc.base
    eps = fld.epsilon
    zeta = np.asarray(zeta, dtype=float)
    if not base.periodic[0] and (abs(zeta[0]) > 0 or abs(zeta[-1]) > 0):
        raise ValueError("zeta must be compactly supported in the base chart")
    weights = base.quad_weights()
    grads = [base.deriv(zeta, a, 1) for a in range(base.dim)]
    sheets = stack.sheets
    q = stack.q
    span = None
    if fld.disc.z_periodic:
        span = fld.disc.hz * len(fld.disc.z_nodes)

    per_sheet = []
    env = c_prime * eps**2 + c_prime * sum(
        np.exp(-SQRT2 * (1.0 + kappa) * dmin / eps) for dmin in stack.min_gaps
    )
    worst_margin = np.inf
    worst = None
    for l in range(q):
        interaction = np.zeros(base.shape)
        if l > 0:
            interaction += np.exp(-SQRT2 * np.abs(sheets[l] - sheets[l - 1]) / eps)
        elif span is not None and q >= 2:
            interaction += np.exp(-SQRT2 * np.abs(sheets[0] + span - sheets[-1]) / eps)
        if l < q - 1:
            interaction += np.exp(-SQRT2 * np.abs(sheets[l + 1] - sheets[l]) / eps)
        elif span is not None and q >= 2:
            interaction += np.exp(-SQRT2 * np.abs(sheets[0] + span - sheets[-1]) / eps)
        c_sheet = fld.metric.conformal(sheets[l])
        vol = c_sheet ** (base.dim / 2.0)
        lhs = float(np.sum(zeta**2 * interaction * vol * weights))
        grad2 = sum(g**2 for g in grads) / c_sheet
        rhs = float(
            c_prime * np.sum(eps**2 * grad2 * vol * weights)
            + env * np.sum(zeta**2 * vol * weights)
        )
        margin = rhs - lhs
        per_sheet.append((lhs, rhs))
        if margin < worst_margin:
            worst_margin = margin
            worst = (lhs, rhs)
    lhs, rhs = worst if worst is not None else (0.0, 0.0)
    return StabilityCheckResult(
        lhs=lhs, rhs=rhs, satisfied=bool(worst_margin >= 0.0), margin=float(worst_margin), per_sheet=per_sheet
    )


def calibrate_stability_constant(
    fld: PhaseField, stack: LayerStack, zetas: Sequence[np.ndarray], kappa: float = 0.1
) -> float:
    """Smallest c' making the inequality hold on every test function."""
    best = 0.0
    base = fld.disc.base
    eps = fld.epsilon
    weights = base.quad_weights()
    env_unit = eps**2 + sum(
        np.exp(-SQRT2 * (1.0 + kappa) * dmin / eps) for dmin in stack.min_gaps
    )
    span = fld.disc.hz * len(fld.disc.z_nodes) if fld.disc.z_periodic else None
    for zeta in zetas:
        zeta = np.asarray(zeta, dtype=float)
        grads = [base.deriv(zeta, a, 1) for a in range(base.dim)]
        for l in range(stack.q):
            interaction = np.zeros(base.shape)
            if l > 0:
                interaction += np.exp(-SQRT2 * np.abs(stack.sheets[l] - stack.sheets[l - 1]) / eps)
            elif span is not None:
                interaction += np.exp(
                    -SQRT2 * np.abs(stack.sheets[0] + span - stack.sheets[-1]) / eps
                )
            if l < stack.q - 1:
                interaction += np.exp(-SQRT2 * np.abs(stack.sheets[l + 1] - stack.sheets[l]) / eps)
            elif span is not None:
                interaction += np.exp(
                    -SQRT2 * np.abs(stack.sheets[0] + span - stack.sheets[-1]) / eps
                )
            c_sheet = fld.metric.conformal(stack.sheets[l])
            vol = c_sheet ** (base.dim / 2.0)
            lhs = float(np.sum(zeta**2 * interaction * vol * weights))
            grad2 = sum(g**2 for g in grads) / c_sheet
            denom = float(
                np.sum(eps**2 * grad2 * vol * weights) + env_unit * np.sum(zeta**2 * vol * weights)
            )
            if denom > 0:
                best = max(best, lhs / denom)
    return best
