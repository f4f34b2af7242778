"""Spectral gap of the truncated generator, acoustic-branch characterization,
and resolvent probes on the high-frequency line kappa + i gamma/eps and in the
low-frequency region.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import model
from .criticality import CriticalPoint
from .errors import AdmissibilityError
from .model import (
    Field,
    Params,
    Truncation,
    assemble_blocks,
    balance_full,
    balanced,
)


def poincare_constant(params: Params, j_max: int, k_max: int) -> float:
    """sqrt of the smallest Laplacian symbol over active fluid modes:
    sqrt(min(alpha^2, pi^2))."""
    del j_max, k_max  # adding modes never lowers the minimum below the analytic value
    return float(np.sqrt(min(params.alpha**2, np.pi**2)))


def acoustic_cutoff(params: Params, eps: float) -> float:
    """Threshold on |Im lambda| separating the acoustic branch.

    Acoustic imaginary parts sit near sqrt(Pr mu)/eps >= sqrt(Pr mu_min)/eps;
    half of that floor keeps the slow crossing pair below the cutoff for every
    eps in the working range (a bare 1/(2 eps) would misfile the crossing pair
    once eps is moderate).
    """
    mu_min = params.alpha**2  # smallest mu among phi-carrying modes (k = 0 row)
    return max(0.5 / eps, 0.5 * np.sqrt(params.pr * mu_min) / eps)


@dataclass
class GapReport:
    eps: float
    r1: float
    kappa1: float
    witness_mode: tuple[int, int]
    acoustic_abscissa: float
    excluded: int
    table: dict = field(default_factory=dict)


def spectral_gap(
    params: Params,
    eps: float,
    r1: float,
    j_max: int,
    k_max: int,
    critical: CriticalPoint,
) -> GapReport:
    """Per-mode eigenvalue survey at (r1, eps).

    kappa1 = min(-Re lambda) over the truncation excluding the critical pair;
    the pair is identified by eigenvector overlap (>= 0.99) with the critical
    eigenvectors, never by value proximity.
    """
    trunc = Truncation(j_max, k_max, params.alpha)
    bs = assemble_blocks(trunc, params, r1, eps)
    s = balance_full(params, eps)
    yref = s * critical.u_plus
    yref = yref / np.linalg.norm(yref)
    cutoff = acoustic_cutoff(params, eps)

    kappa1 = np.inf
    witness = None
    acoustic_abscissa = -np.inf
    excluded_total = 0
    table = {}

    for i, m in enumerate(trunc.full_modes):
        mt = balanced(bs.full[i], s)
        if (m.j, m.k) == (critical.mode_c.j, critical.mode_c.k):
            w, vr = np.linalg.eig(mt)
            vr = vr / np.linalg.norm(vr, axis=0)
            excluded = set()
            for ref in (yref, np.conj(yref)):
                ov = np.abs(np.conj(ref) @ vr)
                idx = int(np.argmax(ov))
                if ov[idx] >= 0.99:
                    excluded.add(idx)
            excluded_total += len(excluded)
            kept = np.array([x for x in range(len(w)) if x not in excluded])
            evals = w
            w_for_gap = w[kept] if kept.size else np.array([])
        else:
            evals = np.linalg.eigvals(mt)
            w_for_gap = evals
        table[(m.j, m.k)] = evals
        fast = evals[np.abs(evals.imag) >= cutoff]
        if fast.size:
            acoustic_abscissa = max(acoustic_abscissa, float(fast.real.max()))
        if w_for_gap.size:
            cand = float(np.min(-w_for_gap.real))
            if cand < kappa1:
                kappa1, witness = cand, (m.j, m.k)

    if bs.acoustic.shape[0]:
        w = np.linalg.eigvals(bs.acoustic)
        for i, m in enumerate(trunc.acoustic_modes):
            table[(m.j, 0)] = w[i]
            cand = float(np.min(-w[i].real))
            if cand < kappa1:
                kappa1, witness = cand, (m.j, 0)
            fast = w[i][np.abs(w[i].imag) >= cutoff]
            if fast.size:
                acoustic_abscissa = max(acoustic_abscissa, float(fast.real.max()))
    for i, m in enumerate(trunc.scalar_modes):
        vals = bs.scalar_diag[i]
        table[(0, m.k)] = vals.astype(complex)
        cand = float(np.min(-vals))
        if cand < kappa1:
            kappa1, witness = cand, (0, m.k)

    if kappa1 <= 0:
        raise AdmissibilityError(
            f"basic state unstable in the complement: min(-Re lambda) = {kappa1:.3e} "
            f"at mode {witness}"
        )
    return GapReport(
        eps=eps,
        r1=r1,
        kappa1=float(kappa1),
        witness_mode=witness,
        acoustic_abscissa=float(acoustic_abscissa),
        excluded=excluded_total,
        table=table,
    )


# ---------------------------------------------------------------------------
# resolvent probes
# ---------------------------------------------------------------------------


@dataclass
class ResolventProbe:
    lam: complex
    w_norm: float
    grad_w_norm: float
    u_norm: float
    phi_norm: float
    grad_phi_norm: float
    f_norm_eps_x: float
    bound_ratio: float
    flagged: bool


def _solve_resolvent(
    trunc: Truncation, params: Params, r1: float, eps: float, lam: complex, f: Field
) -> tuple[Field, bool]:
    """(lam + L^eps) u = f solved per mode in balanced coordinates; the flag
    marks a near-singular block."""
    bs = assemble_blocks(trunc, params, r1, eps)
    s5 = balance_full(params, eps)
    out = np.zeros(trunc.dim, dtype=complex)
    flagged = False

    if bs.full.shape[0]:
        a = lam * np.eye(5)[None, :, :] - bs.full * (s5[None, :, None] / s5[None, None, :])
        rows = trunc.full_rows
        rhs = f.values[rows] * s5[None, :]
        sig = np.linalg.svd(a, compute_uv=False)
        if np.any(sig[:, -1] < 1e-10 * sig[:, 0]):
            flagged = True
        sol = np.linalg.solve(a, rhs[:, :, None])[:, :, 0]
        out[rows.ravel()] = (sol / s5[None, :]).ravel()
    if bs.acoustic.shape[0]:
        s2 = np.array([eps, params.pr**-0.5])
        a = lam * np.eye(2)[None, :, :] - bs.acoustic * (s2[None, :, None] / s2[None, None, :])
        rows = trunc.acoustic_rows
        rhs = f.values[rows] * s2[None, :]
        sig = np.linalg.svd(a, compute_uv=False)
        if np.any(sig[:, -1] < 1e-10 * sig[:, 0]):
            flagged = True
        sol = np.linalg.solve(a, rhs[:, :, None])[:, :, 0]
        out[rows.ravel()] = (sol / s2[None, :]).ravel()
    if bs.scalar_diag.shape[0]:
        rows = trunc.scalar_rows
        denom = lam - bs.scalar_diag
        if np.any(np.abs(denom) < 1e-10 * max(1.0, abs(lam))):
            flagged = True
        out[rows.ravel()] = (f.values[rows] / denom).ravel()
    return Field(trunc, out), flagged


def _probe_from_solution(
    u: Field, f: Field, lam: complex, eps: float, params: Params, c_p: float, flagged: bool
) -> ResolventProbe:
    t = u.trunc
    w_norm = float(np.sqrt(model.component_norm_sq(u, t.is_w)))
    grad_w = float(
        np.sqrt(np.sum(t.nu[t.is_w] * t.sym_mu[t.is_w] * np.abs(u.values[t.is_w]) ** 2))
    )
    phi_norm = float(np.sqrt(model.component_norm_sq(u, t.is_phi)))
    grad_phi = float(
        np.sqrt(np.sum(t.nu[t.is_phi] * t.sym_mu[t.is_phi] * np.abs(u.values[t.is_phi]) ** 2))
    )
    u_norm = model.norm_fluid(u, params.pr)
    f_norm = model.norm_eps_X(f, eps, params.pr)
    gamma = abs(lam.imag) * eps
    ratio = ((gamma + c_p) * w_norm + grad_w) / f_norm if f_norm > 0 else np.inf
    return ResolventProbe(
        lam=lam,
        w_norm=w_norm,
        grad_w_norm=grad_w,
        u_norm=u_norm,
        phi_norm=phi_norm,
        grad_phi_norm=grad_phi,
        f_norm_eps_x=f_norm,
        bound_ratio=float(ratio),
        flagged=flagged,
    )


def resolvent_probe_highfreq(
    params: Params,
    eps: float,
    kappa: float,
    gamma_grid,
    f: Field,
    r1: float,
) -> list[ResolventProbe]:
    """Probe lambda = kappa + i gamma/eps over the gamma grid.

    bound_ratio = ((gamma + c_P) ||w|| + ||grad w||) / |||F|||_{eps,X}; flagged
    points (lambda at an eigenvalue) are excluded from empirical constants by
    the caller.
    """
    trunc = f.trunc
    c_p = poincare_constant(params, trunc.j_max, trunc.k_max)
    probes = []
    for gamma in np.asarray(gamma_grid, dtype=float):
        lam = kappa + 1j * gamma / eps
        u, flagged = _solve_resolvent(trunc, params, r1, eps, lam, f)
        probes.append(_probe_from_solution(u, f, lam, eps, params, c_p, flagged))
    return probes


def resolvent_probe_lowfreq(
    params: Params,
    eps: float,
    lambda_grid,
    f: Field,
    r1: float,
    critical: CriticalPoint,
) -> list[dict]:
    """Probe the region |lambda| <= O(1/eps) with the critical pair projected
    out of the datum first.

    Reported ratios: (eps ||phi|| + eps^2 ||grad phi||) / |||F|||_{eps,X} and
    (1 + |lambda|) ||bu|| / |||F|||_{eps,X}.
    """
    from .dynamics import project_Q

    trunc = f.trunc
    fq = project_Q(f, critical, eps)
    out = []
    for lam in np.asarray(lambda_grid, dtype=complex):
        u, flagged = _solve_resolvent(trunc, params, r1, eps, lam, fq)
        t = trunc
        phi_norm = float(np.sqrt(model.component_norm_sq(u, t.is_phi)))
        grad_phi = float(
            np.sqrt(np.sum(t.nu[t.is_phi] * t.sym_mu[t.is_phi] * np.abs(u.values[t.is_phi]) ** 2))
        )
        u_norm = model.norm_fluid(u, params.pr)
        f_norm = model.norm_eps_X(fq, eps, params.pr)
        out.append(
            {
                "lam": complex(lam),
                "ratio_pressure": (eps * phi_norm + eps**2 * grad_phi) / f_norm,
                "ratio_fluid": (1.0 + abs(lam)) * u_norm / f_norm,
                "u_norm": u_norm,
                "flagged": flagged,
            }
        )
    return out


def default_probe_field(
    trunc: Truncation, critical: CriticalPoint, seed: int = 1234
) -> Field:
    """Unit coefficients on the critical mode and one scalar mode plus a
    seeded dense background."""
    rng = np.random.default_rng(seed)
    f = Field.random(trunc, rng)
    f = Field(trunc, f.values / max(np.linalg.norm(f.values), 1.0))
    sl = trunc.slice_of(critical.mode_c.j, critical.mode_c.k)
    v = f.values.copy()
    v[sl] = v[sl] + 1.0
    sl_sc = trunc.slice_of(0, 1)
    v[sl_sc] = v[sl_sc] + 1.0
    return Field(trunc, v)


def acoustic_branch_fit(params: Params, r1: float, eps_grid, mode) -> dict:
    """Fit |Im lambda_acoustic| against 1/eps on one full mode; the slope
    approximates sqrt(Pr mu) and the eps exponent is -1."""
    from .criticality import fit_rate
    from .model import WHICH_AC, assemble

    eps_grid = np.asarray(eps_grid, dtype=float)
    ims = []
    res = []
    for eps in eps_grid:
        s = balance_full(params, eps)
        w = np.linalg.eigvals(balanced(assemble(mode, WHICH_AC, params, r1, eps).entries, s))
        cut = acoustic_cutoff(params, eps)
        fast = w[np.abs(w.imag) >= cut]
        if fast.size == 0:
            fast = w[np.argsort(-np.abs(w.imag))[:2]]
        ims.append(float(np.max(np.abs(fast.imag))))
        res.append(float(np.max(fast.real)))
    fit = fit_rate(eps_grid, np.array(ims))
    return {
        "exponent": fit.slope,  # expected -1
        "prefactor": float(np.exp(fit.intercept)),  # expected ~ sqrt(Pr mu)
        "expected_prefactor": float(np.sqrt(params.pr * mode.mu)),
        "max_real": float(np.max(res)),
        "im_values": np.array(ims),
    }


def resolvent_blowup_fit(
    params: Params, eps: float, r1: float, trunc: Truncation, lam0: complex, f: Field,
    radii=(1e-2, 1e-3, 1e-4, 1e-5), direction: complex = 1.0,
) -> dict:
    """Fit the growth of the probe norm as lambda approaches a simple
    eigenvalue lam0 along the given direction; exponent ~ 1."""
    from .criticality import fit_rate

    norms = []
    for r in radii:
        lam = lam0 + r * direction
        u, _ = _solve_resolvent(trunc, params, r1, eps, lam, f)
        norms.append(model.norm_eps(u, eps, params.pr))
    fit = fit_rate(np.array(radii), np.array(norms))
    return {"exponent": -fit.slope, "norms": np.array(norms), "fit": fit}
