"""The acceptance suite: one named check per criterion, shared context.

Each criterion function returns a CriterionResult; run_all_criteria evaluates
all of them on a RunConfig and is what both the CLI `acceptance` subcommand
and the pytest acceptance module call.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import criticality, dynamics, model, periodic, spectral_survey, stokes
from .errors import SolvabilityError
from .model import Field, Mode, Params, Truncation, assemble
from .model import WHICH_AC, WHICH_AC_ADJOINT, WHICH_INC, WHICH_INC_ADJOINT


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    data: dict = field(default_factory=dict)


class AcceptanceContext:
    """Caches the expensive shared pieces (criticalities, sweep, trajectories)."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.params: Params = cfg.params
        self.trunc = Truncation(cfg.j_max, cfg.k_max, cfg.params.alpha)
        self._inc = None
        self._acs = {}
        self._study = None
        self._gaps = {}

    @property
    def inc(self):
        if self._inc is None:
            self._inc = criticality.find_inc_critical(
                self.params, self.cfg.j_max, self.cfg.k_max)
        return self._inc

    def ac(self, eps: float):
        if eps not in self._acs:
            self._acs[eps] = criticality.find_ac_critical(
                self.params, eps, self.cfg.j_max, self.cfg.k_max,
                tol=self.cfg.tol_criticality, inc=self.inc)
        return self._acs[eps]

    @property
    def study(self):
        if self._study is None:
            self._study = criticality.eps_convergence_study(
                self.params, self.cfg.eps_grid, self.cfg.j_max, self.cfg.k_max,
                tol=self.cfg.tol_criticality, inc=self.inc)
            for acp in self._study.ac:
                self._acs.setdefault(acp.eps, acp)
        return self._study

    def gap(self, eps: float):
        if eps not in self._gaps:
            ac = self.ac(eps)
            self._gaps[eps] = spectral_survey.spectral_gap(
                self.params, eps, ac.r1c, self.cfg.j_max, self.cfg.k_max, ac)
        return self._gaps[eps]


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def criterion_1_threshold_oracle(ctx: AcceptanceContext) -> CriterionResult:
    """Closed-form oscillatory threshold vs eigensolver-detected crossing at 50
    admissible (params, mode) samples, relative error <= 1e-9."""
    rng = np.random.default_rng(ctx.cfg.seed)
    worst = 0.0
    samples = 0
    attempts = 0
    while samples < 50 and attempts < 500:
        attempts += 1
        pr = float(rng.uniform(1.3, 8.0))
        d = float(rng.uniform(0.05, 0.9))
        alpha = float(rng.uniform(0.6, 3.0))
        j = int(rng.integers(1, 4))
        k = int(rng.integers(1, 4))
        mode = Mode(j, k, alpha)
        # place r2 above the window edge where a^2 turns positive
        p0 = Params(pr=pr, d=d, r2=0.0, alpha=alpha)
        a0 = criticality.inc_oscillatory_threshold(p0, mode).a_sq
        p1 = Params(pr=pr, d=d, r2=100.0, alpha=alpha)
        a1 = criticality.inc_oscillatory_threshold(p1, mode).a_sq
        if a1 <= a0:
            continue
        r2sq_edge = -a0 / ((a1 - a0) / 100.0**2)
        if r2sq_edge < 0:
            r2sq_edge = 0.0
        r2 = float(np.sqrt(r2sq_edge * rng.uniform(1.5, 4.0) + 1.0))
        p = Params(pr=pr, d=d, r2=r2, alpha=alpha)
        thr = criticality.inc_oscillatory_threshold(p, mode)
        if not thr.oscillatory:
            continue
        r1_formula = float(np.sqrt(thr.r1_sq))
        r1_eig = criticality.inc_crossing_by_eigensolver(p, mode, tol=1e-13)
        worst = max(worst, abs(r1_eig - r1_formula) / r1_formula)
        samples += 1
    ok = samples == 50 and worst <= 1e-9
    return CriterionResult(1, "threshold_oracle_equivalence", ok,
                           f"{samples} samples, worst rel err {worst:.3e}",
                           {"worst": worst, "samples": samples})


def criterion_2_classical_limit(ctx: AcceptanceContext) -> CriterionResult:
    """Stationary threshold 27 pi^4 / 4 at r2 = 0, alpha^2 = pi^2/2, k = 1."""
    alpha = np.pi / np.sqrt(2.0)
    p = Params(pr=ctx.params.pr, d=ctx.params.d, r2=0.0, alpha=alpha)
    val = criticality.inc_stationary_threshold(p, Mode(1, 1, alpha))
    ref = 27.0 * np.pi**4 / 4.0
    rel = abs(val - ref) / ref
    return CriterionResult(2, "classical_limit", rel <= 1e-9,
                           f"R1^2 = {val:.12g} vs 27 pi^4/4 = {ref:.12g} (rel {rel:.3e})",
                           {"value": val, "reference": ref})


def criterion_3_singular_limit_rates(ctx: AcceptanceContext) -> CriterionResult:
    study = ctx.study
    slopes = {k: study.fits[k].slope for k in ("r1c", "a", "u_plus", "u_plus_star")}
    r2s = {k: study.fits[k].r_squared for k in slopes}
    ok = all(1.8 <= s <= 2.2 for s in slopes.values()) and all(v >= 0.99 for v in r2s.values())
    detail = "; ".join(f"{k}: slope {slopes[k]:.3f} r2 {r2s[k]:.4f}" for k in slopes)
    return CriterionResult(3, "singular_limit_rates", ok, detail,
                           {"slopes": slopes, "r_squared": r2s})


def criterion_4_transversality(ctx: AcceptanceContext) -> CriterionResult:
    worst = 0.0
    points = [ctx.inc] + [ctx.ac(e) for e in ctx.cfg.eps_grid]
    all_positive = True
    for cp in points:
        fd = criticality.transversality_fd(cp)
        rel = abs(fd - cp.transversality) / abs(fd)
        worst = max(worst, rel)
        all_positive = all_positive and cp.transversality.real > 0
    ok = worst <= 1e-6 and all_positive
    return CriterionResult(4, "transversality", ok,
                           f"worst FD rel err {worst:.3e}; Re > 0: {all_positive}",
                           {"worst": worst})


def criterion_5_structure_identities(ctx: AcceptanceContext) -> CriterionResult:
    params = ctx.params
    rng = np.random.default_rng(ctx.cfg.seed + 5)
    worst_adj = 0.0
    r1 = ctx.inc.r1c
    modes = [Mode(int(rng.integers(1, ctx.cfg.j_max)), int(rng.integers(1, ctx.cfg.k_max)),
                  params.alpha) for _ in range(12)]
    for mode in modes:
        for eps in ctx.cfg.eps_grid:
            m = assemble(mode, WHICH_AC, params, r1, eps).entries
            madj = assemble(mode, WHICH_AC_ADJOINT, params, r1, eps).entries
            w = mode.component_weights(eps, params.pr)
            ref = (m.T * w[None, :]) / w[:, None]
            scale = max(1.0, float(np.max(np.abs(m))))
            worst_adj = max(worst_adj, float(np.max(np.abs(madj - ref))) / scale)
        mi = assemble(mode, WHICH_INC, params, r1).entries
        miadj = assemble(mode, WHICH_INC_ADJOINT, params, r1).entries
        wi = model.inc_weight_vector(mode, params)
        refi = (mi.T * wi[None, :]) / wi[:, None]
        scale = max(1.0, float(np.max(np.abs(mi))))
        worst_adj = max(worst_adj, float(np.max(np.abs(miadj - refi))) / scale)

    worst_bio = 0.0
    worst_kernel = 0.0
    for eps in ctx.cfg.eps_grid:
        ac = ctx.ac(eps)
        w = ac.weight_vector()
        for uj, star, expect in (
            (ac.u_plus, ac.u_plus_star, 1.0),
            (ac.u_plus, ac.u_minus_star, 0.0),
            (ac.u_minus, ac.u_minus_star, 1.0),
            (ac.u_minus, ac.u_plus_star, 0.0),
        ):
            val = complex(np.sum(w * uj * np.conj(star)))
            worst_bio = max(worst_bio, abs(val - expect))
        ws = periodic.PeriodicWorkspace(ac, ctx.trunc, 4)
        for sign in (+1, -1):
            res = periodic.pf_norm_eps(ws.apply_B(ws.z_field(sign)), params.pr)
            worst_kernel = max(worst_kernel, res)
    ok = worst_adj <= 1e-13 and worst_bio <= 1e-12 and worst_kernel <= 1e-12
    return CriterionResult(
        5, "structure_identities", ok,
        f"adjoint {worst_adj:.2e} (<=1e-13 scaled); biorth {worst_bio:.2e}; "
        f"kernel residual {worst_kernel:.2e}",
        {"adjoint": worst_adj, "biorthogonality": worst_bio, "kernel": worst_kernel})


def criterion_6_uniform_gap(ctx: AcceptanceContext) -> CriterionResult:
    kappas = []
    cs = []
    rate_ok = True
    for eps in ctx.cfg.eps_grid:
        rep = ctx.gap(eps)
        kappas.append(rep.kappa1)
        ac = ctx.ac(eps)
        u0s = [Field.random(ctx.trunc, np.random.default_rng(ctx.cfg.seed + i))
               for i in range(6)]
        df = dynamics.decay_fit(ctx.params, eps, ac, u0s, T=10.0 / rep.kappa1)
        cs.append(df.c_fit)
        rate_ok = rate_ok and df.kappa_fit >= 0.95 * rep.kappa1
    ratio_k = max(kappas) / min(kappas)
    ratio_c = max(cs) / min(cs)
    ok = min(kappas) > 0 and ratio_k <= 2.0 and rate_ok and ratio_c <= 2.0
    return CriterionResult(
        6, "uniform_gap_and_decay", ok,
        f"kappa1 ratio {ratio_k:.3f}; rates >= 0.95 kappa1: {rate_ok}; "
        f"C ratio {ratio_c:.3f}",
        {"kappa1": kappas, "c_fit": cs})


def criterion_7_periodic_solvability(ctx: AcceptanceContext) -> CriterionResult:
    eps = ctx.cfg.eps_grid[len(ctx.cfg.eps_grid) // 2]
    ac = ctx.ac(eps)
    m_max = ctx.cfg.m_harmonics
    ws = periodic.PeriodicWorkspace(ac, ctx.trunc, m_max)
    rng = np.random.default_rng(ctx.cfg.seed + 7)
    v = periodic.projections(
        periodic.PeriodicField.random(ctx.trunc, ws.a, m_max, eps, rng), ac).q_part
    f = ws.apply_B(v)
    res = periodic.solve_Beps(f, ac, cross_check=True)
    rt_err = float(np.max(np.abs(res.u.coeffs - v.coeffs))
                   / max(np.max(np.abs(v.coeffs)), 1e-300))

    up = ac.field_u_plus(ctx.trunc).values
    rej_hi = False
    try:
        bad = periodic.PeriodicField.from_harmonic(ctx.trunc, ws.a, m_max, eps, 1, up * 2e-12)
        periodic.solve_Beps(bad, ac)
    except SolvabilityError:
        rej_hi = True
    ok_lo = True
    try:
        near = periodic.PeriodicField.from_harmonic(ctx.trunc, ws.a, m_max, eps, 1, up * 5e-13)
        periodic.solve_Beps(near, ac)
    except SolvabilityError:
        ok_lo = False
    ok = (res.residual <= 1e-10 and res.rep_discrepancy <= 1e-8
          and rt_err <= 1e-9 and rej_hi and ok_lo)
    return CriterionResult(
        7, "periodic_solvability", ok,
        f"residual {res.residual:.2e}; two-method {res.rep_discrepancy:.2e}; "
        f"round-trip {rt_err:.2e}; rejection boundary ok: {rej_hi and ok_lo}",
        {"residual": res.residual, "rep": res.rep_discrepancy, "round_trip": rt_err})


def criterion_8_semisimplicity(ctx: AcceptanceContext) -> CriterionResult:
    eps = ctx.cfg.eps_grid[len(ctx.cfg.eps_grid) // 2]
    ac = ctx.ac(eps)
    m_max = 4
    ws = periodic.PeriodicWorkspace(ac, ctx.trunc, m_max)
    rng = np.random.default_rng(ctx.cfg.seed + 8)
    f = periodic.PeriodicField.random(ctx.trunc, ws.a, m_max, eps, rng)
    radii = np.array([1e-2, 1e-3, 1e-4, 1e-5])
    worst = 0.0
    fits = {}
    for lam0 in (0.0, 1j * ws.a_eps, -1j * ws.a_eps):
        norms = []
        for r in radii:
            rr = periodic.resolvent_Beps(lam0 + r * (0.6 + 0.8j), f, ac)
            norms.append(periodic.pf_norm_eps(rr.u, ctx.params.pr))
        fit = criticality.fit_rate(radii, np.array(norms))
        expo = -fit.slope
        fits[str(lam0)] = expo
        worst = max(worst, abs(expo - 1.0))
    ok = worst <= 0.05
    return CriterionResult(8, "semisimple_poles", ok,
                           f"blow-up exponents {fits} (worst dev {worst:.3f})",
                           {"exponents": fits})


def criterion_9_omega_solvability(ctx: AcceptanceContext) -> CriterionResult:
    m_max = ctx.cfg.m_harmonics
    table = {}
    for eps in ctx.cfg.eps_grid:
        ac = ctx.ac(eps)
        ws = periodic.PeriodicWorkspace(ac, ctx.trunc, m_max)
        rng = np.random.default_rng(ctx.cfg.seed + 9)
        f = periodic.projections(
            periodic.PeriodicField.random(ctx.trunc, ws.a, m_max, eps, rng), ac).q_part
        fx = periodic.pf_norm_xa(f, ctx.params.pr)
        for omega in ctx.cfg.omega_grid:
            r = periodic.solve_Beps_omega(f, omega, ac)
            table[(eps, omega)] = periodic.pf_norm_ya(r.u, ctx.params.pr) / fx
    vals = np.array(list(table.values()))
    ref = table[(min(ctx.cfg.eps_grid), 0.0)] if (min(ctx.cfg.eps_grid), 0.0) in table \
        else float(np.median(vals))
    spread = float(np.max(vals) / np.min(vals))
    ok = spread <= 2.0 and float(np.max(vals)) <= 10.0 * ref
    return CriterionResult(
        9, "omega_solvability_uniform", ok,
        f"ratio spread {spread:.3f}; max {np.max(vals):.4g} vs 10x ref {10 * ref:.4g}",
        {"spread": spread, "max": float(np.max(vals)), "ref": ref})


def energy_survey(cfg) -> dict:
    """Shared by criterion 10 and the `energy` subcommand."""
    ctx = AcceptanceContext(cfg) if not isinstance(cfg, AcceptanceContext) else cfg
    cfg = ctx.cfg
    per_eps = {}
    names = ("ineq_5_3", "ineq_5_4", "ineq_5_5", "ineq_5_6", "ineq_5_7", "ineq_5_21")
    for eps in cfg.eps_grid:
        ac = ctx.ac(eps)
        beta = ac.a / ctx.inc.a
        kappa1 = ctx.gap(eps).kappa1
        ecfg = dynamics.EnergyConfig.default(beta=beta, kappa1=kappa1, d=cfg.params.d)
        rng = np.random.default_rng(cfg.seed + 10)
        c_stars = {n: 0.0 for n in names}
        continuity = 0.0
        trajs = []
        for rep in range(3):
            u0 = Field.random(ctx.trunc, rng)
            # bias one datum toward the critical mode so the buoyancy coupling
            # is active and the minimal constants stay strictly positive
            if rep == 0:
                u0 = u0 + 2.0 * Field(ctx.trunc, ac.field_u_plus(ctx.trunc).values.real)
            forcing = dynamics.TimeFourierForcing(
                omegas=np.array([0.0, ac.a]),
                coeffs=[Field.random(ctx.trunc, rng) * 0.3,
                        Field.random(ctx.trunc, rng) * 0.2])
            traj = dynamics.solve_ivp(cfg.params, eps, beta, u0, forcing,
                                      T=3.0, r1=ac.r1c, n_samples=25)
            trajs.append(traj)
            mr = dynamics.verify_energy_inequalities(traj, ecfg)
            continuity = max(continuity, mr.continuity_residual)
            for n in names:
                c_stars[n] = max(c_stars[n], mr.reports[n].c_star)
        # oscillation integral on projected unforced data
        uq = dynamics.project_Q(Field.random(ctx.trunc, np.random.default_rng(cfg.seed)),
                                ac, eps)
        osc = dynamics.oscillation_integral(cfg.params, eps, ac.r1c, beta, uq,
                                            kappa=ecfg.kappa, T=None)
        ws = dynamics.EnergyWorkspace(ctx.trunc, cfg.params, eps)
        e0 = float(ws.energy(uq.values[None, :], cfg=ecfg)[0])
        per_eps[eps] = {
            "c_stars": c_stars,
            "continuity": continuity,
            "oscillation_ratio": osc / e0,
            "kappa": ecfg.kappa,
        }
    worst_ratio = 0.0
    for n in names + ("oscillation_ratio",):
        vals = np.array([
            per_eps[e]["c_stars"][n] if n != "oscillation_ratio"
            else per_eps[e]["oscillation_ratio"] for e in cfg.eps_grid])
        if np.all(vals <= 1e-14):
            continue
        worst_ratio = max(worst_ratio, float(np.max(vals) / max(np.min(vals), 1e-300)))
    return {
        "per_eps": per_eps,
        "continuity_max": max(per_eps[e]["continuity"] for e in cfg.eps_grid),
        "uniform_ok": worst_ratio <= 2.0,
        "worst_ratio": worst_ratio,
    }


def criterion_10_energy_machinery(ctx: AcceptanceContext) -> CriterionResult:
    res = energy_survey(ctx)
    # coupling sandwich on random probes
    rng = np.random.default_rng(ctx.cfg.seed + 20)
    sandwich_ok = True
    for _ in range(20):
        u = Field.random(ctx.trunc, rng)
        lo, mid, hi = dynamics.sandwich_check(u, ctx.params)
        sandwich_ok = sandwich_ok and (lo <= mid + 1e-12 and mid <= hi + 1e-12)
    ok = res["continuity_max"] <= 1e-12 and res["uniform_ok"] and sandwich_ok
    return CriterionResult(
        10, "energy_machinery", ok,
        f"continuity {res['continuity_max']:.2e}; sandwich {sandwich_ok}; "
        f"C* spread {res['worst_ratio']:.3f}",
        {"continuity": res["continuity_max"], "worst_ratio": res["worst_ratio"]})


def criterion_11_resolvent_probes(ctx: AcceptanceContext) -> CriterionResult:
    gamma_grid = np.geomspace(1.0, 100.0, 25)
    highs, lows = [], []
    for eps in ctx.cfg.eps_grid:
        ac = ctx.ac(eps)
        fpro = spectral_survey.default_probe_field(ctx.trunc, ac, seed=ctx.cfg.seed)
        kappa = ctx.gap(eps).kappa1 / 2.0
        probes = spectral_survey.resolvent_probe_highfreq(
            ctx.params, eps, kappa, gamma_grid, fpro, ac.r1c)
        good = [p.bound_ratio for p in probes if not p.flagged]
        highs.append(max(good))
        lam_grid = [0.5, 1.0 + 1j * ac.a, 0.3 / eps, 0.3j / eps + kappa,
                    (0.2 + 0.2j) / eps]
        lr = spectral_survey.resolvent_probe_lowfreq(
            ctx.params, eps, lam_grid, fpro, ac.r1c, ac)
        lows.append(max(r["ratio_fluid"] for r in lr if not r["flagged"]))
    med_h = float(np.median(highs))
    med_l = float(np.median(lows))
    ok = max(highs) <= 2.0 * med_h and max(lows) <= 2.0 * med_l
    return CriterionResult(
        11, "resolvent_probes_uniform", ok,
        f"highfreq C(eps) max {max(highs):.4g} / median {med_h:.4g}; "
        f"lowfreq max {max(lows):.4g} / median {med_l:.4g}",
        {"high": highs, "low": lows})


def criterion_12_stokes(ctx: AcceptanceContext) -> CriterionResult:
    sweep = stokes.stokes_sweep(ctx.params.alpha, 32, 32, seed=ctx.cfg.seed)
    r_all = np.concatenate([sweep["r1"], sweep["r2"]])
    med = float(np.median(r_all))
    ok = sweep["worst_residual"] <= 1e-12 and float(np.max(r_all)) <= 4.0 * med
    return CriterionResult(
        12, "stokes_estimates", ok,
        f"worst residual {sweep['worst_residual']:.2e}; max ratio "
        f"{float(np.max(r_all)):.4g} vs median {med:.4g}",
        {"worst_residual": sweep["worst_residual"], "max_ratio": float(np.max(r_all))})


def criterion_13_determinism(ctx: AcceptanceContext) -> CriterionResult:
    import filecmp
    import tempfile

    from . import cli

    cfg = ctx.cfg
    small = cli.RunConfig(
        params=cfg.params,
        eps_grid=cfg.eps_grid[:3],
        omega_grid=[0.0, 0.1],
        eta_rel_grid=[-0.01, 0.0, 0.01],
        j_max=min(cfg.j_max, 8),
        k_max=min(cfg.k_max, 8),
        m_harmonics=min(cfg.m_harmonics, 4),
        tol_criticality=cfg.tol_criticality,
        tol_solve=cfg.tol_solve,
        seed=cfg.seed,
    )
    import os

    identical = True
    details = []
    with tempfile.TemporaryDirectory() as tmp:
        d1, d2 = os.path.join(tmp, "r1"), os.path.join(tmp, "r2")
        for d in (d1, d2):
            cli.run("critical", small, out_dir=d)
            cli.run("sweep-eps", small, out_dir=d)
        for name in sorted(os.listdir(d1)):
            same = filecmp.cmp(os.path.join(d1, name), os.path.join(d2, name),
                               shallow=False)
            identical = identical and same
            if not same:
                details.append(name)
    return CriterionResult(13, "determinism", identical,
                           "byte-identical outputs" if identical
                           else f"differing files: {details}",
                           {"differs": details})


ALL_CRITERIA = (
    criterion_1_threshold_oracle,
    criterion_2_classical_limit,
    criterion_3_singular_limit_rates,
    criterion_4_transversality,
    criterion_5_structure_identities,
    criterion_6_uniform_gap,
    criterion_7_periodic_solvability,
    criterion_8_semisimplicity,
    criterion_9_omega_solvability,
    criterion_10_energy_machinery,
    criterion_11_resolvent_probes,
    criterion_12_stokes,
    criterion_13_determinism,
)


def run_all_criteria(cfg) -> list:
    ctx = AcceptanceContext(cfg)
    return [fn(ctx) for fn in ALL_CRITERIA]
