"""The one-dimensional connecting profile, its truncations, and its corrector.

The profile H solves H'' = W'(H) with H(0) = 0 and limits -1/+1. It is
integrated through the first-order reduction H' = sqrt(2 W(H)) (the first
integral is exact for the true solution, which removes the unstable-manifold
sensitivity of shooting on the second-order equation). Tables are uniform
grids plus cubic splines for off-grid C2 queries; beyond the table the
exponential tail expansions take over, so consumers may evaluate anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np
from scipy import integrate, interpolate

from aclab.errors import NumericFailure
from aclab.wells import DoubleWell, eval_w, well_constants

SQRT2 = np.sqrt(2.0)

FIRST_INTEGRAL_TOL = 1e-10
ODE_RESIDUAL_TOL = 1e-9


def _rk4_first_integral(well: DoubleWell, t_grid: np.ndarray, substeps: int = 8) -> np.ndarray:
    """Integrate h' = sqrt(2 W(h)) from h(0)=0 along t_grid >= 0."""
    rhs = lambda h: np.sqrt(max(2.0 * eval_w(well, 0, min(h, 1.0)), 0.0))
    h = np.empty_like(t_grid)
    h[0] = 0.0
    for i in range(len(t_grid) - 1):
        dt = (t_grid[i + 1] - t_grid[i]) / substeps
        y = h[i]
        for _ in range(substeps):
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * dt * k1)
            k3 = rhs(y + 0.5 * dt * k2)
            k4 = rhs(y + dt * k3)
            y = y + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        h[i + 1] = min(y, 1.0)
    return h


@dataclass
class Profile:
    """Tabulated connecting profile on a symmetric uniform grid.

    h, dh, d2h are samples of H, H', H''; a0 and h0 the tail amplitude
    and total 1-D energy. Off-grid evaluation uses cubic splines inside
    the table and the exponential tail expansions outside, so the object
    is usable on all of R.
    """

    grid: np.ndarray
    h: np.ndarray
    dh: np.ndarray
    d2h: np.ndarray
    a0: float
    h0: float
    well: DoubleWell
    _sp_h: interpolate.CubicSpline = field(repr=False, default=None)
    _sp_dh: interpolate.CubicSpline = field(repr=False, default=None)
    _sp_d2h: interpolate.CubicSpline = field(repr=False, default=None)

    def __post_init__(self):
        self._sp_h = interpolate.CubicSpline(self.grid, self.h)
        self._sp_dh = interpolate.CubicSpline(self.grid, self.dh)
        self._sp_d2h = interpolate.CubicSpline(self.grid, self.d2h)

    @property
    def t_max(self) -> float:
        return float(self.grid[-1])

    def _tail_split(self, t):
        t = np.asarray(t, dtype=float)
        inside = np.abs(t) <= self.t_max
        return t, inside

    def eval_h(self, t):
        t, inside = self._tail_split(t)
        out = np.where(inside, self._sp_h(np.clip(t, -self.t_max, self.t_max)), 0.0)
        tail = ~inside
        if np.any(tail):
            s = np.sign(t[np.atleast_1d(tail)]) if np.ndim(t) else np.sign(t)
            a = np.abs(t)
            out = np.where(tail, np.sign(t) * (1.0 - self.a0 * np.exp(-SQRT2 * a)), out)
        return out if np.ndim(t) else float(out)

    def eval_dh(self, t):
        t, inside = self._tail_split(t)
        out = np.where(inside, self._sp_dh(np.clip(t, -self.t_max, self.t_max)), 0.0)
        tail = ~inside
        if np.any(tail):
            out = np.where(tail, SQRT2 * self.a0 * np.exp(-SQRT2 * np.abs(t)), out)
        return out if np.ndim(t) else float(out)

    def eval_d2h(self, t):
        t, inside = self._tail_split(t)
        out = np.where(inside, self._sp_d2h(np.clip(t, -self.t_max, self.t_max)), 0.0)
        tail = ~inside
        if np.any(tail):
            out = np.where(tail, -np.sign(t) * 2.0 * self.a0 * np.exp(-SQRT2 * np.abs(t)), out)
        return out if np.ndim(t) else float(out)

    def eval_d3h(self, t):
        """H''' = W''(H) H' (differentiated ODE)."""
        return eval_w(self.well, 2, self.eval_h(t)) * self.eval_dh(t)

    def check(self):
        """Raise NumericFailure if the table violates its invariants."""
        fi = np.max(np.abs(self.dh**2 - 2.0 * eval_w(self.well, 0, self.h)))
        if fi > FIRST_INTEGRAL_TOL:
            raise NumericFailure("first integral violated", achieved=fi)
        res = np.max(np.abs(self.d2h - eval_w(self.well, 1, self.h)))
        if res > ODE_RESIDUAL_TOL:
            raise NumericFailure("profile ODE residual too large", achieved=res)
        if self.h[len(self.grid) // 2] != 0.0:
            raise NumericFailure("H(0) != 0")
        if np.any(np.diff(self.h) < 0):
            raise NumericFailure("H not monotone on the table")
        # strict increase except where the tail saturates at the precision of 1.0
        core = np.abs(self.h) < 1.0 - 1e-13
        if np.any(np.diff(self.h[core]) <= 0):
            raise NumericFailure("H not strictly increasing away from the tail")
        # the true gap is A0 exp(-sqrt(2) T) (1 + o(1)); allow the amplitude,
        # floored at the double-precision resolution of 1.0
        edge = abs(self.h[-1] - 1.0)
        tol = max(2.0 * self.a0 * np.exp(-SQRT2 * self.t_max), 1e-13)
        if edge > tol:
            raise NumericFailure("H(t_max) not within tail tolerance of 1", achieved=edge)


def solve_profile(well: DoubleWell, t_max: float = 16.0, n: int = 4097) -> Profile:
    """Solve for the profile of a validated well on [-t_max, t_max].

    n is the total number of grid points (odd so that 0 is a node).
    The negative side is filled by odd symmetry; H' and H'' come from
    the first integral and the well, which is exact for the true orbit.
    """
    if t_max < 10:
        raise ValueError("t_max must be >= 10 to reach the tail regime")
    if n < 2049:
        raise ValueError("need at least 2049 grid points")
    if n % 2 == 0:
        n += 1
    half = np.linspace(0.0, t_max, (n + 1) // 2)
    h_half = _rk4_first_integral(well, half)
    grid = np.concatenate([-half[:0:-1], half])
    h = np.concatenate([-h_half[:0:-1], h_half])
    dh = np.sqrt(np.maximum(2.0 * eval_w(well, 0, h), 0.0))
    d2h = eval_w(well, 1, h)

    # two-term tail fit (1 - H) e^{sqrt(2) t} = A0 - c2 e^{-sqrt(2) t}: the
    # second regressor removes the leading bias of a pure log fit. The window
    # is absolute so the gap stays far above the integrator rounding floor.
    win = (half >= 6.5) & (half <= 10.5) & (h_half < 1.0)
    tw = half[win]
    yw = (1.0 - h_half[win]) * np.exp(SQRT2 * tw)
    design = np.column_stack([np.ones_like(tw), np.exp(-SQRT2 * tw)])
    coef, *_ = np.linalg.lstsq(design, yw, rcond=None)
    a0 = float(coef[0])

    consts = well_constants(well, profile=_ProfileStub(grid, h))
    prof = Profile(grid=grid, h=h, dh=dh, d2h=d2h, a0=a0, h0=consts.h0, well=well)
    prof.check()
    return prof


class _ProfileStub:
    # enough of the Profile surface for well_constants' tail fit
    def __init__(self, grid, h):
        self.grid = grid
        self.h = h


def profile_energy(profile: Profile) -> float:
    """Quadrature of H'(t)^2 over the table (equals h0 for the true orbit)."""
    sp = interpolate.CubicSpline(profile.grid, profile.dh**2)
    return float(sp.integrate(profile.grid[0], profile.grid[-1]))


def _smoothstep5(x):
    """Quintic smoothstep: 0 for x<=0, 1 for x>=1, C2 monotone between."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x**2)


def _smoothstep5_d(x, k):
    inside = (x > 0.0) & (x < 1.0)
    x = np.clip(x, 0.0, 1.0)
    if k == 1:
        v = 30.0 * x**2 * (x - 1.0) ** 2
    elif k == 2:
        v = 60.0 * x * (x - 1.0) * (2.0 * x - 1.0)
    elif k == 3:
        v = 60.0 * (6.0 * x**2 - 6.0 * x + 1.0)
    elif k == 4:
        v = 360.0 * x - 180.0
    else:
        raise ValueError(k)
    return np.where(inside, v, 0.0)


def cutoff_chi(x):
    """Even C2 cutoff: 1 on [-1,1], 0 outside (-2,2), quintic in between."""
    return _smoothstep5(2.0 - np.abs(np.asarray(x, dtype=float)))


def cutoff_chi_d(x, k):
    """k-th derivative of cutoff_chi (piecewise quintic)."""
    x = np.asarray(x, dtype=float)
    s = -np.sign(x)
    return _smoothstep5_d(2.0 - np.abs(x), k) * s**k


@dataclass
class TruncatedProfile:
    """Profile glued to exactly +-1 outside a window of half-width 2*Lambda.

    Matches the base profile on (-Lambda, Lambda). The gluing defect
    xi = Hbar'' - W'(Hbar) is tabulated together with two derivatives.
    """

    base: Profile
    lam: float
    grid: np.ndarray
    hbar: np.ndarray
    defect: np.ndarray
    defect_d1: np.ndarray
    defect_d2: np.ndarray

    def eval(self, t, k: int = 0):
        """Hbar and derivatives up to k=2 at arbitrary t (vectorized)."""
        t = np.asarray(t, dtype=float)
        lam = self.lam
        x = t / lam
        chi = cutoff_chi(x)
        sgn = np.sign(t)
        gap = self.base.eval_h(t) - sgn  # H - (+-1), exponentially small where chi < 1
        if k == 0:
            # branch on the plateau so Hbar == H there exactly, not to one ulp
            out = np.where(chi == 1.0, self.base.eval_h(t), chi * gap + sgn)
        elif k == 1:
            dchi = cutoff_chi_d(x, 1) / lam
            out = dchi * gap + chi * self.base.eval_dh(t)
        elif k == 2:
            dchi = cutoff_chi_d(x, 1) / lam
            d2chi = cutoff_chi_d(x, 2) / lam**2
            out = d2chi * gap + 2.0 * dchi * self.base.eval_dh(t) + chi * self.base.eval_d2h(t)
        else:
            raise ValueError("k must be 0, 1, or 2")
        return out if np.ndim(t) else float(out)

    def defect_sup(self) -> float:
        """sup over the table of |xi| + |xi'| + |xi''|."""
        return float(
            np.max(np.abs(self.defect) + np.abs(self.defect_d1) + np.abs(self.defect_d2))
        )


def truncate(profile: Profile, lam: float, n: int = 8193) -> TruncatedProfile:
    """Glue the profile to +-1 with a quintic cutoff at scale lam.

    The cutoff is fixed (reproducibility); only smoothness and support
    are structural, so the defect constant is reported, never assumed.
    """
    if lam < 4:
        raise ValueError("lambda must be >= 4")
    if lam > profile.t_max / 2:
        raise ValueError(
            f"lambda={lam:.2f} exceeds half the table range {profile.t_max / 2:.2f}"
        )
    grid = np.linspace(-2.2 * lam, 2.2 * lam, n)
    x = grid / lam
    chi = cutoff_chi(x)
    d1 = cutoff_chi_d(x, 1) / lam
    d2 = cutoff_chi_d(x, 2) / lam**2
    d3 = cutoff_chi_d(x, 3) / lam**3
    d4 = cutoff_chi_d(x, 4) / lam**4
    sgn = np.sign(grid)
    h = profile.eval_h(grid)
    dh = profile.eval_dh(grid)
    d2h = profile.eval_d2h(grid)
    d3h = profile.eval_d3h(grid)
    well = profile.well
    d4h = eval_w(well, 3, h) * dh**2 + eval_w(well, 2, h) * d2h
    gap = h - sgn

    hbar = np.where(chi == 1.0, h, chi * gap + sgn)
    hbar1 = d1 * gap + chi * dh
    hbar2 = d2 * gap + 2 * d1 * dh + chi * d2h
    hbar3 = d3 * gap + 3 * d2 * dh + 3 * d1 * d2h + chi * d3h
    hbar4 = d4 * gap + 4 * d3 * dh + 6 * d2 * d2h + 4 * d1 * d3h + chi * d4h

    w1 = eval_w(well, 1, hbar)
    w2 = eval_w(well, 2, hbar)
    w3 = eval_w(well, 3, hbar)
    defect = hbar2 - w1
    defect_d1 = hbar3 - w2 * hbar1
    defect_d2 = hbar4 - w3 * hbar1**2 - w2 * hbar2
    return TruncatedProfile(
        base=profile,
        lam=float(lam),
        grid=grid,
        hbar=hbar,
        defect=defect,
        defect_d1=defect_d1,
        defect_d2=defect_d2,
    )


@dataclass
class CorrectorTable:
    """The bounded odd solution of J'' = W''(H) J + t H', J(0) = 0.

    Tabulated from the closed-form double integral; dj holds J'.
    """

    grid: np.ndarray
    j: np.ndarray
    dj: np.ndarray
    profile: Profile
    _sp_j: interpolate.CubicSpline = field(repr=False, default=None)

    def __post_init__(self):
        self._sp_j = interpolate.CubicSpline(self.grid, self.j)

    def eval_j(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(
            np.abs(t) <= self.grid[-1], self._sp_j(np.clip(t, self.grid[0], self.grid[-1])), 0.0
        )
        return out if np.ndim(t) else float(out)

    def ode_residual(self) -> float:
        """Sup of |J'' - W''(H) J - t H'| via 4th-order differences of the table."""
        h = self.grid[1] - self.grid[0]
        j = self.j
        d2 = np.full_like(j, np.nan)
        d2[2:-2] = (-j[:-4] + 16 * j[1:-3] - 30 * j[2:-2] + 16 * j[3:-1] - j[4:]) / (12 * h**2)
        rhs = (
            eval_w(self.profile.well, 2, self.profile.eval_h(self.grid)) * j
            + self.grid * self.profile.eval_dh(self.grid)
        )
        return float(np.nanmax(np.abs(d2 - rhs)))


def solve_corrector(profile: Profile) -> CorrectorTable:
    """Evaluate the corrector from its closed-form nested integral.

    J(t) = H'(t) * S(t) with S(t) = int_0^t G(s)/H'(s)^2 ds and
    G(s) = int_{-inf}^s tau H'(tau)^2 dtau. G is computed from the right
    tail (G(+inf) = 0 by parity) so its relative accuracy survives where
    both G and H'^2 underflow toward the tails.
    """
    grid = profile.grid
    dh = profile.dh
    integrand = interpolate.CubicSpline(grid, grid * dh**2)
    anti = integrand.antiderivative()
    half = grid[grid >= 0.0]
    g_right = -(anti(grid[-1]) - anti(half))  # = -int_s^T tau H'^2
    g = np.concatenate([g_right[:0:-1], g_right])  # even reflection
    with np.errstate(divide="raise", invalid="raise"):
        k = g / dh**2
    s = interpolate.CubicSpline(grid, k).antiderivative()(grid)
    s -= s[len(grid) // 2]  # S(0) = 0
    j = dh * s
    dj = profile.d2h * s + dh * k
    table = CorrectorTable(grid=grid, j=j, dj=dj, profile=profile)
    res = table.ode_residual()
    if res > 1e-7:
        raise NumericFailure("corrector ODE residual too large", achieved=res)
    return table


def corrector_identity(table: CorrectorTable) -> float:
    """Quadrature of W'''(H) J H'^2 (equals -h0/2 for the true corrector)."""
    prof = table.profile
    vals = eval_w(prof.well, 3, prof.h) * table.j * prof.dh**2
    return float(interpolate.CubicSpline(prof.grid, vals).antiderivative()(prof.grid[-1])
                 - interpolate.CubicSpline(prof.grid, vals).antiderivative()(prof.grid[0]))


def interaction_integral(profile: Profile, t_sep: float) -> tuple[float, float]:
    """Two-layer interaction integral and its exponential asymptote.

    Returns (value, asymptote) with
    value = int (W''(H(t)) - 2) H'(t - T) H'(t) dt and
    asymptote = -4 sqrt(2) A0^2 exp(-sqrt(2) T).
    """
    if t_sep < 0:
        raise ValueError("separation must be nonnegative")
    well = profile.well

    def f(t):
        return (eval_w(well, 2, profile.eval_h(t)) - 2.0) * profile.eval_dh(t - t_sep) * profile.eval_dh(t)

    lo = -profile.t_max
    hi = profile.t_max + t_sep
    value, err = integrate.quad(
        f, lo, hi, epsabs=1e-16, epsrel=1e-12, limit=400, points=[0.0, t_sep]
    )
    asym = -4.0 * SQRT2 * profile.a0**2 * np.exp(-SQRT2 * t_sep)
    if not np.isfinite(value):
        raise NumericFailure("interaction quadrature failed", achieved=err)
    return float(value), float(asym)


def export_profile_csv(path, profile: Profile, corrector: CorrectorTable | None = None):
    """Write (t, H, dH, d2H[, J]) as CSV for the plotting component."""
    import csv as _csv

    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh)
        header = ["t", "H", "dH", "d2H"] + (["J"] if corrector is not None else [])
        w.writerow(header)
        for i, t in enumerate(profile.grid):
            row = [f"{t:.17g}", f"{profile.h[i]:.17g}", f"{profile.dh[i]:.17g}", f"{profile.d2h[i]:.17g}"]
            if corrector is not None:
                row.append(f"{corrector.j[i]:.17g}")
            w.writerow(row)
