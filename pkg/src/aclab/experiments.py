"""Registered experiments: quantitative laws checked against tolerances.

Each experiment returns (criteria, artifacts): criteria are
(label, passed, detail) triples evaluated at fixed tolerances, artifacts
are files written under the experiment's output directory. The
acceptance suite maps one experiment to each headline criterion.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from aclab import barrier as bar
from aclab import field as fld_mod
from aclab import geometry as geo
from aclab import io as io_mod
from aclab import profile as prof_mod
from aclab import spectrum as spec_mod
from aclab import toda as toda_mod
from aclab import wells

SQRT2 = np.sqrt(2.0)

REGISTRY = {}


def experiment(name, description):
    def wrap(fn):
        fn.experiment_name = name
        fn.description = description
        REGISTRY[name] = fn
        return fn

    return wrap


def crit(label, passed, detail):
    return {"label": label, "passed": bool(passed), "detail": detail}


def _well_and_profile(params, t_max=16.0):
    well = wells.resolve_well(params.get("well", "standard"))
    prof = prof_mod.solve_profile(well, t_max=t_max, n=params.get("profile_n", 4097))
    return well, prof


def _long_profile(params, eps_min):
    # the glue window 3|log eps| must fit inside half the table
    t_max = max(16.0, float(np.ceil(6.2 * abs(np.log(eps_min)))))
    return _well_and_profile(params, t_max=t_max)


# ---------------------------------------------------------------------------


@experiment("heteroclinic-constants", "1-d profile fidelity and the constants h0, A0")
def run_heteroclinic_constants(params, out, rng):
    well, prof = _well_and_profile(params)
    consts = wells.well_constants(well, profile=prof)
    t = np.linspace(-10, 10, 4001)
    sup_err = float(np.max(np.abs(prof.eval_h(t) - np.tanh(t / SQRT2))))
    h0_err = abs(consts.h0 - 2.0 * SQRT2 / 3.0)
    a0_err = abs(prof.a0 - 2.0)
    corr = prof_mod.solve_corrector(prof)
    art = [io_mod.write_csv(
        Path(out) / "profile.csv",
        ["t", "H", "dH", "d2H", "J"],
        zip(prof.grid, prof.h, prof.dh, prof.d2h, corr.j),
    )]
    criteria = [
        crit("profile sup-error vs closed form <= 1e-8", sup_err <= 1e-8, f"{sup_err:.3e}"),
        crit("h0 within 1e-8 of 2*sqrt(2)/3", h0_err <= 1e-8, f"{h0_err:.3e}"),
        crit("A0 within 1e-4 of 2", a0_err <= 1e-4, f"{a0_err:.3e}"),
    ]
    return criteria, art


@experiment("interaction-asymptotics", "two-layer interaction integral vs exponential law")
def run_interaction(params, out, rng):
    well, prof = _well_and_profile(params)
    rows = []
    rels = {}
    for t_sep in (6.0, 8.0, 10.0, 12.0):
        value, asym = prof_mod.interaction_integral(prof, t_sep)
        rel = abs(value / asym - 1.0)
        rels[t_sep] = rel
        rows.append((t_sep, value, asym, rel))
    art = [io_mod.write_csv(Path(out) / "interaction.csv", ["T", "value", "asymptote", "rel_gap"], rows)]
    criteria = [
        crit("relative gap <= 0.05 at T = 8", rels[8.0] <= 0.05, f"{rels[8.0]:.3e}"),
        crit("relative gap <= 0.01 at T = 12", rels[12.0] <= 0.01, f"{rels[12.0]:.3e}"),
        crit("gap decreasing in T", rels[8.0] > rels[10.0] > rels[12.0], str([rels[k] for k in (8.0, 10.0, 12.0)])),
    ]
    return criteria, art


@experiment("corrector-identities", "bounded corrector: ODE residual, parity, energy identity")
def run_corrector(params, out, rng):
    well, prof = _well_and_profile(params)
    corr = prof_mod.solve_corrector(prof)
    res = corr.ode_residual()
    ident = prof_mod.corrector_identity(corr)
    ident_err = abs(ident + prof.h0 / 2.0)
    t = np.linspace(0.25, 12.0, 60)
    parity = float(np.max(np.abs(corr.eval_j(-t) + corr.eval_j(t))))
    art = [io_mod.write_json(Path(out) / "corrector.json", {
        "ode_residual": res, "identity": ident, "parity": parity, "h0": prof.h0,
    })]
    criteria = [
        crit("ODE residual <= 1e-8", res <= 1e-8, f"{res:.3e}"),
        crit("cubic-term identity within 1e-6 of -h0/2", ident_err <= 1e-6, f"{ident_err:.3e}"),
        crit("odd parity within 1e-10", parity <= 1e-10, f"{parity:.3e}"),
    ]
    return criteria, art


@experiment("single-layer-critical-point", "flat single-layer solution: residual, energy, mass, spectrum")
def run_single_layer(params, out, rng):
    eps = params.get("eps", 0.05)
    well, prof = _long_profile(params, eps)
    ny = params.get("ny", 48)
    if "metric" in params:
        metric = geo.resolve_metric(dict(params["metric"]))
        ny = metric.base.shape[0]
    else:
        metric = geo.flat_product(geo.BaseGrid.circle(2 * np.pi, ny), z_range=(-1, 1))
    seed = fld_mod.superpose(metric, prof, eps, [np.zeros(ny)], points_per_eps=16)
    solved, history = fld_mod.newton_solve(seed, tol=1e-10)
    stack = fld_mod.nodal_layers(solved)
    e = fld_mod.energy(solved)
    mass = fld_mod.varifold_mass(solved, prof.h0)
    area = fld_mod.nodal_measure(solved, stack)
    rep = spec_mod.morse_index(solved, k=6, want_vectors=True)

    disc = solved.disc
    uz = np.gradient(solved.u, disc.hz, axis=-1, edge_order=2)
    uz = uz * disc.interior.reshape(disc.shape)
    i0 = int(np.argmin(np.abs(rep.eigenvalues)))
    v = rep.eigenvectors[:, i0]
    mnorm = lambda w: float(np.sqrt(np.sum(w**2 * disc.mass)))
    overlap = abs(float(np.sum(uz.ravel() * v * disc.mass))) / (mnorm(uz.ravel()) * mnorm(v))
    lv = spec_mod.second_variation_apply(solved, v.reshape(disc.shape))
    mode_residual = mnorm(lv.ravel()) / mnorm(v)

    art = [
        io_mod.write_field_checkpoint(Path(out) / "single_layer.bin", solved),
        io_mod.write_json(Path(out) / "spectrum.json", rep.to_dict()),
        io_mod.write_csv(Path(out) / "layers.csv", ["y", "f1"],
                         zip(metric.base.axis_nodes(0), stack.sheets[0])),
    ]
    criteria = [
        crit("Newton residual <= 1e-10", history[-1] <= 1e-10, f"{history[-1]:.3e}"),
        crit("energy/h0 within 1% of nodal length", abs(e / prof.h0 / area - 1) <= 0.01,
             f"E/h0={e / prof.h0:.6f} vs area={area:.6f}"),
        crit("varifold mass within 1% of nodal area", abs(mass / area - 1) <= 0.01,
             f"mass={mass:.6f}"),
        crit("Morse index 0", rep.index == 0, f"index={rep.index}, eigs={rep.eigenvalues[:3]}"),
        crit("nullity >= 1", rep.nullity >= 1, f"nullity={rep.nullity}, zero_tol={rep.zero_tol:.2e}"),
        crit("translation mode residual <= 1e-6", mode_residual <= 1e-6 and overlap > 0.999,
             f"|L v|/|v|={mode_residual:.2e}, overlap={overlap:.6f}"),
    ]
    return criteria, art


@experiment("separation-law", "reduced equilibrium separation vs sqrt2 eps |log eps| model")
def run_separation(params, out, rng):
    eps_list = params.get("eps", [0.1, 0.05, 0.025, 0.0125])
    v_const = params.get("potential", 1.0)
    well, prof = _well_and_profile(params)
    table = toda_mod.separation_law(v_const, eps_list, prof.a0, prof.h0)
    art = [io_mod.write_csv(
        Path(out) / "separation.csv",
        ["epsilon", "D", "model", "excess", "excess_over_eps"],
        zip(table.epsilons, table.gaps, table.model, table.excess, table.excess_over_eps),
    )]
    spread = float(np.ptp(table.excess_over_eps))
    mean_c = float(np.mean(np.abs(table.excess_over_eps)))
    ratio_max = float(np.max(table.stable_branch_ratio))
    criteria = [
        crit("|D - model| <= C eps with one constant",
             np.max(np.abs(table.excess_over_eps)) <= 5.0 and spread <= 0.25 * mean_c,
             f"excess/eps={list(np.round(table.excess_over_eps, 4))}"),
        crit("exp(-sqrt2 D/eps)/(eps^2 |log eps|) bounded", ratio_max <= 10.0,
             f"max ratio={ratio_max:.4f}"),
    ]
    return criteria, art


def _pinned_two_layer(prof, eps, gap_ends, ny=48, lz=(-0.55, 0.55), ly=1.0, ppe=12):
    """Two-layer field over an interval base with pinned end gaps.

    Seeded with the reduced-system equilibrium gap profile, which keeps
    the Newton basin reachable when the interaction is not negligible.
    """
    base = geo.BaseGrid.interval(ly, ny)
    metric = geo.flat_product(base, z_range=lz)
    gap = toda_mod.pinned_gap_profile(base, eps, gap_ends, prof.a0, prof.h0)
    sheets = [-gap / 2.0, gap / 2.0]
    seed = fld_mod.superpose(metric, prof, eps, sheets, points_per_eps=ppe)
    solved, hist = fld_mod.newton_solve(seed, tol=1e-10, max_iter=60)
    return metric, solved, hist


@experiment("jacobi-extraction", "normalized gap functions of a two-layer family")
def run_jacobi_extraction(params, out, rng):
    eps_list = params.get("eps", [0.05, 0.025, 0.0125])
    gap_ends = params.get("gap_ends", (0.32, 0.4))
    well, prof = _long_profile(params, min(eps_list))
    fields = []
    for eps in eps_list:
        _, solved, _ = _pinned_two_layer(prof, eps, gap_ends)
        fields.append(solved)
    reports = toda_mod.extract_jacobi(fields)
    rows = [(r.epsilon, r.harnack_ratio, r.jacobi_residual, r.mean_curvature_ratio) for r in reports]
    art = [io_mod.write_csv(Path(out) / "jacobi_extraction.csv",
                            ["epsilon", "harnack", "jacobi_residual", "mc_over_eps_logeps"], rows)]
    y = fields[0].metric.base.axis_nodes(0)
    art.append(io_mod.write_csv(Path(out) / "fhat.csv", ["y"] + [f"fhat_eps{r.epsilon:g}" for r in reports],
                                zip(y, *[r.fhat for r in reports])))
    harnacks = [r.harnack_ratio for r in reports]
    residuals = [r.jacobi_residual for r in reports]
    criteria = [
        crit("Harnack ratio bounded by one constant", max(harnacks) <= 2.0, str(harnacks)),
        crit("Jacobi residual strictly decreasing in eps",
             all(a > b for a, b in zip(residuals, residuals[1:])), str(residuals)),
    ]
    return criteria, art


@experiment("index-comparison", "surface vs phase-field Morse index on three families")
def run_index_comparison(params, out, rng):
    eps_list = params.get("eps", [0.2, 0.1, 0.05])
    well, prof = _long_profile(params, min(eps_list))
    ny = params.get("ny", 48)
    base = geo.BaseGrid.circle(2 * np.pi, ny)
    families = {
        "flat": geo.flat_product(base, z_range=(-1, 1)),
        "positive-potential": geo.synthetic_potential(base, 1.3, z_range=(-1, 1), label="pos-V"),
        "sign-changing": geo.synthetic_potential(
            base, lambda y: 0.8 * np.cos(y) - 0.1, z_range=(-1, 1), label="sign-V"
        ),
    }
    rows = []
    criteria = []
    arts = []
    for fam, metric in families.items():
        surf = spec_mod.surface_index(metric, k=8)
        i_sigma = surf.index + surf.nullity
        for eps in sorted(eps_list)[:2]:  # the two smallest
            seed = fld_mod.superpose(metric, prof, eps, [np.zeros(ny)], points_per_eps=12)
            solved, _ = fld_mod.newton_solve(seed, tol=1e-10)
            rep = spec_mod.morse_index(solved, k=8)
            i_u = rep.index + rep.nullity
            rows.append((fam, eps, surf.index, surf.nullity, rep.index, rep.nullity))
            criteria.append(crit(
                f"{fam} eps={eps:g}: ind(S)+nul(S) >= ind(u)+nul(u)",
                i_sigma >= i_u,
                f"surface {surf.index}+{surf.nullity} vs field {rep.index}+{rep.nullity}",
            ))
            arts.append(io_mod.write_json(
                Path(out) / f"spectrum_{fam}_eps{eps:g}.json",
                {"surface": surf.to_dict(), "field": rep.to_dict()},
            ))
    arts.append(io_mod.write_csv(Path(out) / "index_comparison.csv",
                                 ["family", "eps", "ind_sigma", "nul_sigma", "ind_u", "nul_u"], rows))
    return criteria, arts


@experiment("stability-inequality", "interaction vs gradient inequality on stable two-layer solutions")
def run_stability(params, out, rng):
    eps_pair = params.get("eps", [0.05, 0.025])
    n_zeta = params.get("n_zeta", 20)
    excess = params.get("excess", 1.2)
    length = params.get("length", 0.35)
    well, prof = _long_profile(params, min(eps_pair))
    criteria = []
    arts = []
    constants = {}
    for eps in eps_pair:
        # near-equilibrium separation: the interaction scales like
        # eps^2 |log eps|, which is where one calibration constant is stable;
        # the short base keeps the gap mode positive
        d_eq = toda_mod.separation_model(eps) + excess * eps
        gap_ends = (d_eq, 1.12 * d_eq)
        metric, solved, _ = _pinned_two_layer(prof, eps, gap_ends, ny=32, ly=length)
        rep = spec_mod.morse_index(solved, k=4)
        stack = fld_mod.nodal_layers(solved)
        y = metric.base.axis_nodes(0)
        length = metric.base.lengths[0]
        zetas = []
        for _ in range(n_zeta):
            c = rng.uniform(0.25 * length, 0.75 * length)
            w = rng.uniform(0.06, 0.2) * length
            zeta = np.exp(-((y - c) ** 2) / (2 * w**2))
            zeta[0] = zeta[-1] = 0.0
            zetas.append(zeta)
        c_prime = spec_mod.calibrate_stability_constant(solved, stack, zetas)
        constants[eps] = c_prime
        ok = all(
            spec_mod.stability_check(solved, stack, z, c_prime=1.0001 * c_prime).satisfied
            for z in zetas
        )
        criteria.append(crit(f"eps={eps:g}: stable (index 0)", rep.index == 0,
                             f"index={rep.index}"))
        criteria.append(crit(f"eps={eps:g}: lhs <= rhs for calibrated c'", ok,
                             f"c'={c_prime:.4f}"))
        arts.append(io_mod.write_json(Path(out) / f"stability_eps{eps:g}.json",
                                      {"c_prime": c_prime, "index": rep.index}))
    vals = [constants[e] for e in eps_pair]
    drift = max(vals) / max(min(vals), 1e-300)
    criteria.append(crit("re-calibration drift <= 2x across halving", drift <= 2.0,
                         f"constants={vals}, drift={drift:.3f}"))
    return criteria, arts


@experiment("geometry-kernel", "graph mean curvature vs area variation; Riccati; quadratic error")
def run_geometry_kernel(params, out, rng):
    n_graphs = params.get("n_graphs", 50)
    metrics = [
        geo.circle_ambient(1.0, z_range=(-0.6, 0.8), n=192),
        geo.synthetic_potential(
            geo.BaseGrid.circle(2 * np.pi, 128),
            lambda y: 0.8 + 0.3 * np.cos(y),
            cubic=lambda y: 1.5 + np.sin(y),
            z_range=(-0.8, 0.8),
            label="generic-synthetic",
        ),
    ]
    worst_rel = 0.0
    for i in range(n_graphs):
        metric = metrics[i % len(metrics)]
        base = metric.base
        y = base.axis_nodes(0)
        length = base.lengths[0]
        coef = rng.normal(size=4) * np.array([0.1, 0.05, 0.02, 0.01])
        f = sum(c * np.cos(2 * np.pi * (k + 1) * y / length + rng.uniform(0, np.pi))
                for k, c in enumerate(coef))
        phi = sum(rng.normal() * 0.05 * np.sin(2 * np.pi * (k + 1) * y / length) for k in range(3))
        h = geo.graph_mean_curvature(metric, geo.GraphSurface(f, metric))
        c_f = metric.conformal(f)
        pairing = base.integrate_flat(h * phi * c_f ** (base.dim / 2.0))
        s = 1e-5
        fd = (geo.graph_area(metric, geo.GraphSurface(f + s * phi, metric))
              - geo.graph_area(metric, geo.GraphSurface(f - s * phi, metric))) / (2 * s)
        rel = abs(pairing - fd) / max(abs(fd), 1e-3)
        worst_rel = max(worst_rel, rel)

    ricc = max(m.riccati_consistency(np.linspace(-0.4, 0.6, 9)) for m in metrics)

    y = metrics[0].base.axis_nodes(0)
    length = metrics[0].base.lengths[0]
    f = 0.08 * np.cos(2 * np.pi * y / length) + 0.04 * np.sin(4 * np.pi * y / length)
    q1 = np.max(np.abs(geo.quad_error(metrics[0], geo.GraphSurface(f, metrics[0]))))
    q2 = np.max(np.abs(geo.quad_error(metrics[0], geo.GraphSurface(f / 2, metrics[0]))))
    factor = q1 / q2
    art = [io_mod.write_json(Path(out) / "geometry_kernel.json", {
        "worst_first_variation_rel_err": worst_rel,
        "riccati_consistency": ricc,
        "quad_error_scaling": factor,
    })]
    criteria = [
        crit("mean curvature = area variation to 1e-5 (50 graphs)", worst_rel <= 1e-5,
             f"worst {worst_rel:.3e}"),
        crit("Riccati consistency <= 1e-6", ricc <= 1e-6, f"{ricc:.3e}"),
        crit("quadratic-error scaling in [3.5, 4.5]", 3.5 <= factor <= 4.5, f"{factor:.3f}"),
    ]
    return criteria, art


def _barrier_data(prob, eps, mu=1.0):
    ny, nz = prob.disc.shape
    z = prob.z
    span = prob.metric.z_range[1] - prob.metric.z_range[0]
    vs_prof = mu * eps**2 * (z / eps) * np.exp(-((z / eps) ** 2) / 2.0)
    vf_prof = mu * eps**2 * (1.0 - prob.chi[4](z)) * np.sin(2 * np.pi * z / span)
    zh = 0.05 * mu * eps**2
    return bar.BoundaryData(
        v_flat_hat={
            "y_lo": vf_prof,
            "y_hi": 0.5 * vf_prof,
            "z_lo": np.linspace(vf_prof[0], 0.5 * vf_prof[0], ny),
            "z_hi": np.linspace(vf_prof[-1], 0.5 * vf_prof[-1], ny),
        },
        v_sharp_hat={"y_lo": vs_prof, "y_hi": -0.3 * vs_prof},
        zeta_hat=(zh, -0.5 * zh),
        mu=mu,
    )


def _state_distance(prob, s1, s2, eps, alpha=0.125):
    spacings = (prob.base.spacing(0), prob.z[1] - prob.z[0])
    return (
        bar.weighted_holder_norm(s1.v_flat - s2.v_flat, spacings, eps, alpha)
        + bar.weighted_holder_norm(s1.v_sharp - s2.v_sharp, spacings, eps, alpha)
        + eps ** (2 * alpha) * bar.weighted_holder_norm(s1.zeta - s2.zeta, spacings[:1], eps, alpha)
    )


@experiment("barrier-fixed-point", "three-block Dirichlet barrier: contraction, residual, Lipschitz")
def run_barrier(params, out, rng):
    eps_pair = params.get("eps", [0.1, 0.05])
    well, prof = _well_and_profile(params)
    base = geo.BaseGrid.interval(1.0, params.get("ny", 19))
    metric = geo.synthetic_potential(
        base,
        lambda y: -(0.4 + 0.2 * np.cos(2 * np.pi * y)),
        cubic=lambda y: 0.8 + 0.3 * np.sin(2 * np.pi * y),
        z_range=(-0.48, 0.48),
        label="barrier-metric",
    )
    criteria = []
    arts = []
    factors_by_eps = {}
    for eps in eps_pair:
        prob = bar.BarrierProblem(metric, prof, eps, points_per_band=12.0)
        bd = _barrier_data(prob, eps)
        state = bar.fixed_point_solve(bd, metric, prof, eps, tol=5e-9, problem=prob)
        early = max(state.contraction_factors[:5])
        factors_by_eps[eps] = early
        bc_flat = float(np.max(np.abs(state.v_flat[0, :] - bd.v_flat_hat["y_lo"])))
        bc_sharp = float(np.max(np.abs(state.v_sharp[0, :] - bd.v_sharp_hat["y_lo"])))
        bc_zeta = abs(state.zeta[0] - bd.zeta_hat[0])
        criteria.append(crit(f"eps={eps:g}: contraction factor < 1", early < 1.0, f"{early:.3f}"))
        criteria.append(crit(f"eps={eps:g}: residual <= 1e-8", state.residual <= 1e-8,
                             f"{state.residual:.3e}"))
        criteria.append(crit(f"eps={eps:g}: boundary data exact at nodes",
                             max(bc_flat, bc_sharp, bc_zeta) == 0.0,
                             f"flat {bc_flat:.1e} sharp {bc_sharp:.1e} zeta {bc_zeta:.1e}"))
        arts.append(io_mod.write_json(Path(out) / f"barrier_trace_eps{eps:g}.json", {
            "update_norms": state.update_norms,
            "contraction_factors": state.contraction_factors,
            "residual": state.residual,
            "residual_grid_fd": state.residual_grid_fd,
            "norms": state.norms,
        }))
        if eps == min(eps_pair):
            # Lipschitz stability of the solution map over a 5-point family
            lips = []
            prev = state
            for mu in (0.8, 0.6, 0.4, 0.2):
                bd_mu = _barrier_data(prob, eps, mu=mu)
                st = bar.fixed_point_solve(bd_mu, metric, prof, eps, tol=2e-8,
                                           problem=prob, warm_start=prev)
                dist = _state_distance(prob, st, state, eps)
                data_dist = (1.0 - mu) * eps**2  # data family is linear in mu
                lips.append(dist / data_dist)
                prev = st
            finite = all(np.isfinite(l) for l in lips)
            stable = max(lips) <= 3.0 * min(lips)
            criteria.append(crit("Lipschitz constant finite and stable over 5-point family",
                                 finite and stable, f"L={[round(l, 3) for l in lips]}"))
            arts.append(io_mod.write_json(Path(out) / "barrier_lipschitz.json", {"L": lips}))
    criteria.append(crit("contraction factor decreases with eps",
                         factors_by_eps[min(eps_pair)] <= factors_by_eps[max(eps_pair)],
                         str(factors_by_eps)))
    return criteria, arts


@experiment("enhanced-curvature", "level-set curvature tensor bounded across eps on stable families")
def run_enhanced_curvature(params, out, rng):
    eps_list = params.get("eps", [0.1, 0.05, 0.025])
    beta = params.get("beta", 0.1)
    well, prof = _long_profile(params, min(eps_list))
    rows = []
    sups = {"single-flat": [], "two-layer-pinned": [], "curved-single": []}
    ny = 48
    for eps in eps_list:
        metric = geo.flat_product(geo.BaseGrid.circle(2 * np.pi, ny), z_range=(-1, 1))
        seed = fld_mod.superpose(metric, prof, eps, [np.zeros(ny)], points_per_eps=12)
        solved, _ = fld_mod.newton_solve(seed, tol=1e-10)
        _, sup, _, _ = fld_mod.enhanced_sff(solved, beta=beta)
        sups["single-flat"].append(sup)
        rows.append(("single-flat", eps, sup))

        _, solved2, _ = _pinned_two_layer(prof, eps, (0.56, 0.62), lz=(-0.66, 0.66))
        _, sup2, _, _ = fld_mod.enhanced_sff(solved2, beta=beta, y_margin=0.1)
        sups["two-layer-pinned"].append(sup2)
        rows.append(("two-layer-pinned", eps, sup2))

        base_c = geo.BaseGrid.circle(2 * np.pi, ny)
        metric_c = geo.synthetic_potential(
            base_c, lambda y: 0.4 * np.cos(y) - 0.3, z_range=(-1, 1), label="curved-single"
        )
        seed_c = fld_mod.superpose(metric_c, prof, eps, [np.zeros(ny)], points_per_eps=12)
        solved_c, _ = fld_mod.newton_solve(seed_c, tol=1e-10)
        _, sup_c, _, _ = fld_mod.enhanced_sff(solved_c, beta=beta)
        sups["curved-single"].append(sup_c)
        rows.append(("curved-single", eps, sup_c))
    art = [io_mod.write_csv(Path(out) / "enhanced_curvature.csv", ["family", "eps", "sup_A"], rows)]
    criteria = []
    for fam, vals in sups.items():
        bound = max(1.0, 2.0 * vals[0])
        criteria.append(crit(f"{fam}: sup|A| bounded across eps", max(vals) <= bound,
                             f"sups={[round(v, 4) for v in vals]}"))
    return criteria, art


# ---------------------------------------------------------------------------
# diagnostics beyond the headline criteria


@experiment("truncation-defect", "glue defect of the log-window truncation scales like eps^3")
def run_truncation_defect(params, out, rng):
    eps_list = params.get("eps", [0.1, 0.05, 0.025])
    well, prof = _long_profile(params, min(eps_list))
    rows = []
    ratios = []
    for eps in eps_list:
        lam = 3.0 * abs(np.log(eps))
        tp = prof_mod.truncate(prof, lam)
        ratio = tp.defect_sup() / eps**3
        ratios.append(ratio)
        rows.append((eps, lam, tp.defect_sup(), ratio))
    art = [io_mod.write_csv(Path(out) / "truncation.csv",
                            ["eps", "lambda", "defect_sup", "defect_over_eps3"], rows)]
    criteria = [crit("sup defect / eps^3 bounded by one constant", max(ratios) <= 1.0,
                     f"ratios={[f'{r:.2e}' for r in ratios]}")]
    return criteria, art


@experiment("toda-forcing", "pairwise cancellation and equilibrium seeding of the sheet forcing")
def run_toda_forcing(params, out, rng):
    well, prof = _well_and_profile(params)
    base = geo.BaseGrid.circle(2 * np.pi, 64)
    y = base.axis_nodes(0)
    sheets = [-0.6 + 0.03 * np.sin(y), -0.1 + 0.02 * np.cos(2 * y), 0.45 + 0.01 * np.sin(3 * y)]
    cfg = toda_mod.TodaConfig(base=base, sheets=sheets, epsilon=0.1, potential=1.0,
                              a0=prof.a0, h0=prof.h0)
    total = sum(toda_mod.toda_rhs(cfg))
    w = base.quad_weights()
    net = abs(float(np.sum(total * w)))

    # equilibrium-informed seeds converge at least as fast as naive ones
    eps = 0.1
    lam = 1.0
    metric = geo.synthetic_potential(base, lam, z_range=(-1, 1))
    d_eq = toda_mod.scalar_gap_balance(lam, eps, prof.a0, prof.h0)
    wp = _long_profile(params, eps)[1]
    seed_eq = fld_mod.superpose(metric, wp, eps, [np.full(64, -d_eq / 2), np.full(64, d_eq / 2)],
                                points_per_eps=10)
    _, hist_eq = fld_mod.newton_solve(seed_eq, tol=1e-9, max_iter=60)
    d_naive = d_eq * 1.6
    seed_nv = fld_mod.superpose(metric, wp, eps, [np.full(64, -d_naive / 2), np.full(64, d_naive / 2)],
                                points_per_eps=10)
    try:
        _, hist_nv = fld_mod.newton_solve(seed_nv, tol=1e-9, max_iter=60)
        naive_iters = len(hist_nv)
    except Exception:
        naive_iters = 999
    art = [io_mod.write_json(Path(out) / "toda_forcing.json", {
        "net_forcing": net, "eq_iters": len(hist_eq), "naive_iters": naive_iters,
    })]
    criteria = [
        crit("total forcing cancels to 1e-12", net <= 1e-12, f"{net:.2e}"),
        crit("equilibrium seed converges at least as fast", len(hist_eq) <= naive_iters,
             f"{len(hist_eq)} vs {naive_iters}"),
    ]
    return criteria, art


@experiment("gap-pde", "mean-curvature differences act linearly on the gap")
def run_gap_pde(params, out, rng):
    base = geo.BaseGrid.circle(2 * np.pi, 256)
    metric = geo.synthetic_potential(
        base, lambda y: 0.6 + 0.3 * np.cos(y), cubic=lambda y: 1.0 + 0.5 * np.sin(y), z_range=(-1, 1)
    )
    y = base.axis_nodes(0)
    rels = []
    for amp in (0.04, 0.02):
        f1 = amp * (np.cos(y) + 0.5 * np.sin(2 * y))
        gap = amp * (1.5 + 0.3 * np.cos(y + 1.0))
        lhs, rhs = toda_mod.gap_pde_check(metric, f1, gap)
        rels.append(float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(lhs))))
    art = [io_mod.write_json(Path(out) / "gap_pde.json", {"rel_errors": rels})]
    criteria = [
        crit("difference matches the assembled operator to 5%", rels[0] <= 0.05, f"{rels[0]:.4f}"),
        crit("mismatch shrinks with amplitude", rels[1] <= 0.6 * rels[0],
             f"{rels[0]:.4f} -> {rels[1]:.4f}"),
    ]
    return criteria, art


@experiment("barrier-comparison", "ordering and sliding of a barrier under a solution")
def run_barrier_comparison(params, out, rng):
    eps = params.get("eps", 0.1)
    well, prof = _well_and_profile(params)
    base = geo.BaseGrid.interval(1.0, 17)
    metric = geo.flat_product(base, z_range=(-0.48, 0.48))
    prob = bar.BarrierProblem(metric, prof, eps, points_per_band=6.0)
    ny, nz = prob.disc.shape
    zero = bar.BoundaryData(
        v_flat_hat={"y_lo": np.zeros(nz), "y_hi": np.zeros(nz),
                    "z_lo": np.zeros(ny), "z_hi": np.zeros(ny)},
        v_sharp_hat={"y_lo": np.zeros(nz), "y_hi": np.zeros(nz)},
        zeta_hat=(0.0, 0.0),
    )
    state = bar.fixed_point_solve(zero, metric, prof, eps, tol=1e-8, problem=prob)
    barrier_field = state.field

    # reference solution held slightly above the barrier's far field
    u = np.clip(barrier_field.u + eps**3, -1.0, 1.0)
    u[:, -1] = 1.0
    solution = barrier_field.copy_with(u)

    top = bar.translate_field(barrier_field, 0.3, fill=(-1.0, 1.0 - eps**3))
    rep = bar.comparison_check(top, solution)

    # slide downward until first contact
    stack = fld_mod.nodal_layers(solution)
    b_const = bar.measure_decay_constant(solution, stack.sheets)
    lo, hi = 0.0, 0.3
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        cand = bar.translate_field(barrier_field, mid, fill=(-1.0, 1.0 - eps**3))
        try:
            ok = bar.comparison_check(cand, solution).ordered
        except ValueError:
            ok = False
        if ok:
            hi = mid
        else:
            lo = mid
    t_star = hi
    bound = 7.0 * max(b_const, 0.2) * eps * abs(np.log(eps))
    art = [io_mod.write_json(Path(out) / "comparison.json", {
        "t_star": t_star, "decay_constant": b_const, "bound": bound,
    })]
    criteria = [
        crit("barrier sits below the solution at the foliation top", rep.ordered,
             f"min gap {rep.min_gap:.2e}"),
        crit("first contact within the sliding window", 0.0 <= t_star <= bound,
             f"t*={t_star:.4f}, bound={bound:.4f}"),
    ]
    return criteria, art
