"""Batch experiment runner.

Usage:  achopf <subcommand> --config <path> [--eps e1,e2,...] [--out DIR]
        [--seed N] [--svg]

Subcommands: critical, sweep-eps, branch, gap, resolvent, decay, energy,
periodic, stokes-check, acceptance.  Exit codes: 0 all checks pass, 1 a check
failed, 2 usage/config error.

Config format: flat dotted keys, one `section.key = value` per line, `#`
comments.  Values are numbers, comma-separated number lists, or strings.
Every key a subcommand needs must be present; nothing is defaulted silently.
Outputs are deterministic: identical config and seed give byte-identical
files (floats are emitted with 17 significant digits, complex numbers as
[re, im] pairs, and no timestamps are written).
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import criticality, dynamics, periodic, spectral_survey, stokes
from .errors import AchopfError, ConfigError
from .model import Field, Params, Truncation

SUBCOMMANDS = (
    "critical", "sweep-eps", "branch", "gap", "resolvent",
    "decay", "energy", "periodic", "stokes-check", "acceptance",
)

REQUIRED_KEYS = (
    "params.pr", "params.d", "params.r2", "params.alpha",
    "grids.eps", "grids.omega", "grids.eta_rel",
    "truncation.j_max", "truncation.k_max", "truncation.m_harmonics",
    "tol.criticality", "tol.solve", "seed",
)


@dataclass
class RunConfig:
    params: Params
    eps_grid: list
    omega_grid: list
    eta_rel_grid: list
    j_max: int
    k_max: int
    m_harmonics: int
    tol_criticality: float
    tol_solve: float
    seed: int
    out_dir: str = "out"

    @staticmethod
    def from_text(text: str) -> "RunConfig":
        raw = parse_flat_config(text)
        missing = [k for k in REQUIRED_KEYS if k not in raw]
        if missing:
            raise ConfigError(f"missing config key: {missing[0]}")
        try:
            params = Params(
                pr=float(raw["params.pr"]),
                d=float(raw["params.d"]),
                r2=float(raw["params.r2"]),
                alpha=float(raw["params.alpha"]),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad params block: {e}") from None
        def floats(key):
            v = raw[key]
            return [float(x) for x in (v if isinstance(v, list) else [v])]
        cfg = RunConfig(
            params=params,
            eps_grid=floats("grids.eps"),
            omega_grid=floats("grids.omega"),
            eta_rel_grid=floats("grids.eta_rel"),
            j_max=int(raw["truncation.j_max"]),
            k_max=int(raw["truncation.k_max"]),
            m_harmonics=int(raw["truncation.m_harmonics"]),
            tol_criticality=float(raw["tol.criticality"]),
            tol_solve=float(raw["tol.solve"]),
            seed=int(raw["seed"]),
            out_dir=str(raw.get("output.dir", "out")),
        )
        if not cfg.eps_grid or not cfg.omega_grid or not cfg.eta_rel_grid:
            raise ConfigError("grids must be nonempty")
        if cfg.tol_criticality <= 0 or cfg.tol_solve <= 0:
            raise ConfigError("tolerances must be positive")
        return cfg

    @staticmethod
    def from_file(path: str) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        return RunConfig.from_text(text)


def parse_flat_config(text: str) -> dict:
    """`section.key = value` lines; `#` comments; comma lists."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or " " in key:
            raise ConfigError(f"line {lineno}: bad key {key!r}")
        if "," in value:
            out[key] = [v.strip() for v in value.split(",") if v.strip()]
        else:
            out[key] = value
    return out


# ---------------------------------------------------------------------------
# deterministic writers
# ---------------------------------------------------------------------------


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (complex, np.complexfloating)):
        return f"{float(x.real):.17g}+{float(x.imag):.17g}j"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _jsonable(x):
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def write_csv(path: str, header: list, rows: list):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_json(path: str, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_svg(path: str, series: list, title: str, logx=False, logy=False):
    """Minimal deterministic SVG line chart: series = [(label, xs, ys)]."""
    w, h, pad = 640, 420, 50
    pts_all = []
    for _, xs, ys in series:
        for x, y in zip(xs, ys):
            if (not logx or x > 0) and (not logy or y > 0):
                pts_all.append((np.log10(x) if logx else x, np.log10(y) if logy else y))
    if not pts_all:
        return
    xs0 = [p[0] for p in pts_all]
    ys0 = [p[1] for p in pts_all]
    x0, x1 = min(xs0), max(xs0)
    y0, y1 = min(ys0), max(ys0)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1

    def sx(x):
        v = np.log10(x) if logx else x
        return pad + (v - x0) / (x1 - x0) * (w - 2 * pad)

    def sy(y):
        v = np.log10(y) if logy else y
        return h - pad - (v - y0) / (y1 - y0) * (h - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<text x="{w//2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]
    for i, (label, xs, ys) in enumerate(series):
        pts = " ".join(
            f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys)
            if (not logx or x > 0) and (not logy or y > 0)
        )
        c = colors[i % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        parts.append(f'<text x="{pad}" y="{35 + 14 * i}" font-size="11" fill="{c}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")


@dataclass
class ReportBundle:
    checks: list = field(default_factory=list)  # (name, passed, detail)
    files: list = field(default_factory=list)
    summary_lines: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def check(self, name: str, ok: bool, detail: str):
        self.checks.append((name, bool(ok), detail))
        self.summary_lines.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")

    def note(self, line: str):
        self.summary_lines.append(line)

    def write_summary(self, path: str):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(self.summary_lines) + "\n")
        self.files.append(path)


# ---------------------------------------------------------------------------
# subcommand pipelines
# ---------------------------------------------------------------------------


def _prep(cfg: RunConfig):
    inc = criticality.find_inc_critical(cfg.params, cfg.j_max, cfg.k_max)
    return inc


def run_critical(cfg: RunConfig, out: str, svg: bool) -> ReportBundle:
    rb = ReportBundle()
    inc = _prep(cfg)
    rows = [("INC", 0.0, inc.r1c, inc.a, inc.transversality.real,
             inc.transversality.imag, inc.gap)]
    from ._parallel import map_ordered
    acs = map_ordered(
        lambda e: criticality.find_ac_critical(
            cfg.params, e, cfg.j_max, cfg.k_max, tol=cfg.tol_criticality, inc=inc),
        cfg.eps_grid,
    )
    for ac in acs:
        rows.append(("AC", ac.eps, ac.r1c, ac.a, ac.transversality.real,
                     ac.transversality.imag, ac.gap))
    path = os.path.join(out, "critical.csv")
    write_csv(path, ["regime", "eps", "r1c", "a", "re_transversality",
                     "im_transversality", "gap"], rows)
    rb.files.append(path)
    write_json(os.path.join(out, "critical.json"), {
        "inc": {"r1c": inc.r1c, "a": inc.a, "mode": [inc.mode_c.j, inc.mode_c.k],
                "transversality": inc.transversality, "gap": inc.gap},
        "ac": [{"eps": ac.eps, "r1c": ac.r1c, "a": ac.a,
                "transversality": ac.transversality, "gap": ac.gap} for ac in acs],
    })
    rb.files.append(os.path.join(out, "critical.json"))
    rb.check("transversality_positive",
             inc.transversality.real > 0 and all(a.transversality.real > 0 for a in acs),
             f"Re at INC = {inc.transversality.real:.6g}")
    rb.note(f"critical mode ({inc.mode_c.j},{inc.mode_c.k}); R1c = {inc.r1c:.12g}; "
            f"a = {inc.a:.12g}")
    return rb


def run_sweep_eps(cfg: RunConfig, out: str, svg: bool) -> ReportBundle:
    rb = ReportBundle()
    study = criticality.eps_convergence_study(
        cfg.params, cfg.eps_grid, cfg.j_max, cfg.k_max, tol=cfg.tol_criticality)
    rows = []
    for i, ac in enumerate(study.ac):
        rows.append((ac.eps, ac.r1c, ac.a, study.err_r1c[i], study.err_a[i],
                     study.err_u_plus[i]))
    path = os.path.join(out, "sweep_eps.csv")
    write_csv(path, ["eps", "R1c_eps", "a_eps", "err_R1c", "err_a", "err_uplus"], rows)
    rb.files.append(path)
    write_json(os.path.join(out, "rate_fits.json"), {
        name: {"slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared,
               "errors": f.errors, "xs": f.xs}
        for name, f in study.fits.items()
    })
    rb.files.append(os.path.join(out, "rate_fits.json"))
    if svg:
        sv = os.path.join(out, "sweep_eps.svg")
        write_svg(sv, [
            ("err_R1c", study.eps_grid, study.err_r1c),
            ("err_a", study.eps_grid, study.err_a),
            ("err_uplus", study.eps_grid, study.err_u_plus),
        ], "convergence of the criticality data", logx=True, logy=True)
        rb.files.append(sv)
    ok = all(1.8 <= study.fits[k].slope <= 2.2 for k in ("r1c", "a", "u_plus", "u_plus_star"))
    rb.check("quadratic_rates", ok,
             "; ".join(f"{k}: {study.fits[k].slope:.3f}" for k in study.fits))
    return rb


def run_branch(cfg: RunConfig, out: str, svg: bool) -> ReportBundle:
    rb = ReportBundle()
    inc = _prep(cfg)
    rows = []
    etas = np.array(sorted(cfg.eta_rel_grid)) * inc.r1c
    lam = criticality.eigenpair_branch(inc, etas)
    for e, l in zip(etas, lam):
        rows.append(("INC", 0.0, e, l.real, l.imag))
    for eps in cfg.eps_grid:
        ac = criticality.find_ac_critical(cfg.params, eps, cfg.j_max, cfg.k_max,
                                          tol=cfg.tol_criticality, inc=inc)
        lam = criticality.eigenpair_branch(ac, etas)
        for e, l in zip(etas, lam):
            rows.append(("AC", eps, e, l.real, l.imag))
    path = os.path.join(out, "branch.csv")
    write_csv(path, ["regime", "eps", "eta", "re_lambda", "im_lambda"], rows)
    rb.files.append(path)
    signs = [r[3] for r in rows if r[0] == "INC"]
    crossings = sum(1 for i in range(len(signs) - 1) if signs[i] * signs[i + 1] < 0)
    rb.check("single_crossing", crossings == 1, f"sign changes along eta: {crossings}")
    return rb


def run_gap(cfg: RunConfig, out: str, svg: bool) -> ReportBundle:
    rb = ReportBundle()
    inc = _prep(cfg)
    rows = []
    kappas = []
    for eps in cfg.eps_grid:
        ac = criticality.find_ac_critical(cfg.params, eps, cfg.j_max, cfg.k_max,
                                          tol=cfg.tol_criticality, inc=inc)
        rep = spectral_survey.spectral_gap(cfg.params, eps, ac.r1c, cfg.j_max,
                                           cfg.k_max, ac)
        rows.append((eps, rep.kappa1, rep.witness_mode[0], rep.witness_mode[1],
                     rep.acoustic_abscissa, rep.excluded))
        kappas.append(rep.kappa1)
    path = os.path.join(out, "gap.csv")
    write_csv(path, ["eps", "kappa1", "witness_j", "witness_k",
                     "acoustic_abscissa", "excluded"], rows)
    rb.files.append(path)
    ratio = max(kappas) / min(kappas)
    rb.check("uniform_gap", min(kappas) > 0 and ratio <= 2.0,
             f"kappa1 in [{min(kappas):.6g}, {max(kappas):.6g}], ratio {ratio:.3f}")
    return rb


def run_resolvent(cfg: RunConfig, out: str, svg: bool) -> ReportBundle:
    rb = ReportBundle()
    inc = _prep(cfg)
    trunc = Truncation(cfg.j_max, cfg.k_max, cfg.params.alpha)
    gamma_grid = np.geomspace(1.0, 100.0, 25)
    rows_h, rows_l = [], []
    consts = []
    for eps in cfg.eps_grid:
        ac = criticality.find_ac_critical(cfg.params, eps, cfg.j_max, cfg.k_max,
                                          tol=cfg.tol_criticality, inc=inc)
        fpro = spectral_survey.default_probe_field(trunc, ac, seed=cfg.seed)
        kappa = ac.gap / 2.0
        probes = spectral_survey.resolvent_probe_highfreq(
            cfg.params, eps, kappa, gamma_grid, fpro, ac.r1c)
        good = [p for p in probes if not p.flagged]
        c_eps = max(p.bound_ratio for p in good)
        consts.append(c_eps)
        for p in good:
            rows_h.append((eps, p.lam.real, p.lam.imag, p.bound_ratio))
        lam_grid = [0.5, 1.0 + 1j * ac.a, 2.0j * ac.a + 0.3,
                    0.3 / eps, 0.3j / eps + ac.gap, (0.2 + 0.2j) / eps]
        lows = spectral_survey.resolvent_probe_lowfreq(
            cfg.params, eps, lam_grid, fpro, ac.r1c, ac)
        for rowd in lows:
            rows_l.append((eps, rowd["lam"].real, rowd["lam"].imag,
                           rowd["ratio_fluid"], rowd["ratio_pressure"]))
    write_csv(os.path.join(out, "resolvent_highfreq.csv"),
              ["eps", "re_lambda", "im_lambda", "bound_ratio"], rows_h)
    write_csv(os.path.join(out, "resolvent_lowfreq.csv"),
              ["eps", "re_lambda", "im_lambda", "ratio_fluid", "ratio_pressure"], rows_l)
    rb.files += [os.path.join(out, "resolvent_highfreq.csv"),
                 os.path.join(out, "resolvent_lowfreq.csv")]
    med = float(np.median(consts))
    rb.check("highfreq_uniform", max(consts) <= 2.0 * med,
             f"C(eps) max {max(consts):.4g} vs median {med:.4g}")
    return rb


def run_decay(cfg: RunConfig, out: str, svg: bool) -> ReportBundle:
    rb = ReportBundle()
    inc = _prep(cfg)
    trunc = Truncation(cfg.j_max, cfg.k_max, cfg.params.alpha)
    rows = []
    cs = []
    ok_rate = True
    for eps in cfg.eps_grid:
        ac = criticality.find_ac_critical(cfg.params, eps, cfg.j_max, cfg.k_max,
                                          tol=cfg.tol_criticality, inc=inc)
        u0s = [Field.random(trunc, np.random.default_rng(cfg.seed + i)) for i in range(8)]
        df = dynamics.decay_fit(cfg.params, eps, ac, u0s, T=10.0 / ac.gap)
        rows.append((eps, ac.gap, df.kappa_fit, df.c_fit))
        cs.append(df.c_fit)
        ok_rate = ok_rate and df.kappa_fit >= 0.95 * ac.gap
    path = os.path.join(out, "decay.csv")
    write_csv(path, ["eps", "kappa1", "kappa_fit", "c_fit"], rows)
    rb.files.append(path)
    ratio = max(cs) / min(cs)
    rb.check("decay_rate", ok_rate, "fitted rates >= 0.95 kappa1")
    rb.check("decay_prefactor_uniform", ratio <= 2.0, f"C ratio {ratio:.3f}")
    return rb


def run_energy(cfg: RunConfig, out: str, svg: bool) -> ReportBundle:
    from .acceptance import energy_survey

    rb = ReportBundle()
    res = energy_survey(cfg)
    rows = []
    for eps, entry in res["per_eps"].items():
        for name, c in entry["c_stars"].items():
            rows.append((eps, name, c))
        rows.append((eps, "continuity_residual", entry["continuity"]))
        rows.append((eps, "oscillation_ratio", entry["oscillation_ratio"]))
    path = os.path.join(out, "energy.csv")
    write_csv(path, ["eps", "quantity", "value"], rows)
    rb.files.append(path)
    rb.check("continuity_identity", res["continuity_max"] <= 1e-12,
             f"max residual {res['continuity_max']:.3e}")
    rb.check("constants_uniform", res["uniform_ok"],
             f"worst C* ratio {res['worst_ratio']:.3f}")
    return rb


def run_periodic(cfg: RunConfig, out: str, svg: bool) -> ReportBundle:
    rb = ReportBundle()
    inc = _prep(cfg)
    trunc = Truncation(cfg.j_max, cfg.k_max, cfg.params.alpha)
    rows = []
    ratios = {}
    for eps in cfg.eps_grid:
        ac = criticality.find_ac_critical(cfg.params, eps, cfg.j_max, cfg.k_max,
                                          tol=cfg.tol_criticality, inc=inc)
        ws = periodic.PeriodicWorkspace(ac, trunc, cfg.m_harmonics)
        rng = np.random.default_rng(cfg.seed)
        for omega in cfg.omega_grid:
            f = periodic.PeriodicField.random(trunc, ws.a, cfg.m_harmonics, eps, rng)
            fq = periodic.projections(f, ac).q_part
            r = periodic.solve_Beps_omega(fq, omega, ac)
            ratio = periodic.pf_norm_ya(r.u, cfg.params.pr) / periodic.pf_norm_xa(
                fq, cfg.params.pr)
            ratios[(eps, omega)] = ratio
            rows.append((eps, omega, r.residual, ratio))
    path = os.path.join(out, "periodic_omega.csv")
    write_csv(path, ["eps", "omega", "residual", "norm_ratio"], rows)
    rb.files.append(path)
    vals = list(ratios.values())
    rb.check("omega_uniform", max(vals) / min(vals) <= 2.0,
             f"ratio spread {max(vals) / min(vals):.3f}")
    return rb


def run_stokes_check(cfg: RunConfig, out: str, svg: bool) -> ReportBundle:
    rb = ReportBundle()
    sweep = stokes.stokes_sweep(cfg.params.alpha, 32, 32, seed=cfg.seed)
    rows = [(j, k, r1, r2) for (j, k), r1, r2 in
            zip(sweep["modes"], sweep["r1"], sweep["r2"])]
    path = os.path.join(out, "stokes.csv")
    write_csv(path, ["j", "k", "r1", "r2"], rows)
    rb.files.append(path)
    rb.check("stokes_residuals", sweep["worst_residual"] <= 1e-12,
             f"worst residual {sweep['worst_residual']:.3e}")
    r_all = np.concatenate([sweep["r1"], sweep["r2"]])
    rb.check("stokes_ratios_bounded", float(np.max(r_all)) < np.inf,
             f"max ratio {float(np.max(r_all)):.4g}")
    return rb


def run_acceptance(cfg: RunConfig, out: str, svg: bool) -> ReportBundle:
    from .acceptance import run_all_criteria

    rb = ReportBundle()
    results = run_all_criteria(cfg)
    rows = []
    for res in results:
        rb.check(f"criterion_{res.number:02d}_{res.name}", res.passed, res.detail)
        rows.append((res.number, res.name, "PASS" if res.passed else "FAIL", res.detail))
    path = os.path.join(out, "acceptance.csv")
    write_csv(path, ["number", "name", "status", "detail"], rows)
    rb.files.append(path)
    write_json(os.path.join(out, "acceptance.json"), [
        {"number": r.number, "name": r.name, "passed": r.passed,
         "detail": r.detail, "data": r.data} for r in results
    ])
    rb.files.append(os.path.join(out, "acceptance.json"))
    return rb


_RUNNERS = {
    "critical": run_critical,
    "sweep-eps": run_sweep_eps,
    "branch": run_branch,
    "gap": run_gap,
    "resolvent": run_resolvent,
    "decay": run_decay,
    "energy": run_energy,
    "periodic": run_periodic,
    "stokes-check": run_stokes_check,
    "acceptance": run_acceptance,
}


def run(subcommand: str, cfg: RunConfig, out_dir: str | None = None,
        svg: bool = False) -> ReportBundle:
    if subcommand not in _RUNNERS:
        raise ConfigError(f"unknown subcommand {subcommand!r}; choose from {SUBCOMMANDS}")
    out = out_dir or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    rb = _RUNNERS[subcommand](cfg, out, svg)
    rb.write_summary(os.path.join(out, f"{subcommand.replace('-', '_')}_summary.txt"))
    return rb


def main(argv: list | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(__doc__)
        return 0 if argv else 2
    sub = argv[0]
    if sub not in _RUNNERS:
        print(f"error: unknown subcommand {sub!r}", file=sys.stderr)
        return 2
    config_path = None
    out_dir = None
    seed = None
    eps_override = None
    svg = False
    i = 1
    while i < len(argv):
        tok = argv[i]
        if tok == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
            i += 2
        elif tok == "--out" and i + 1 < len(argv):
            out_dir = argv[i + 1]
            i += 2
        elif tok == "--seed" and i + 1 < len(argv):
            seed = argv[i + 1]
            i += 2
        elif tok == "--eps" and i + 1 < len(argv):
            eps_override = argv[i + 1]
            i += 2
        elif tok == "--svg":
            svg = True
            i += 1
        else:
            print(f"error: unrecognized argument {tok!r}", file=sys.stderr)
            return 2
    if config_path is None:
        print("error: --config <path> is required", file=sys.stderr)
        return 2
    try:
        cfg = RunConfig.from_file(config_path)
        if seed is not None:
            cfg.seed = int(seed)
        if eps_override is not None:
            cfg.eps_grid = [float(x) for x in eps_override.split(",") if x]
    except (ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        rb = run(sub, cfg, out_dir=out_dir, svg=svg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except AchopfError as e:
        print(f"check failure: {e}", file=sys.stderr)
        return 1
    for line in rb.summary_lines:
        print(line)
    return 0 if rb.passed else 1


if __name__ == "__main__":
    sys.exit(main())
