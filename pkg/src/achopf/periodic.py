"""Time-periodic function spaces as truncated time-Fourier series, the
kernel projections of the periodic generator, solvers and resolvent for
B = beta d/dt + L (beta = a_eps/a), the omega-perturbed variant
B(omega) = beta (1+omega) d/dt + L, and monodromy resolvent probes.

All per-harmonic blocks are diagonal in time frequency, so the solvers reduce
to (i m a_eps (1+omega) I - M) solves per (harmonic, mode), with a
one-dimensional deflation of the two kernel directions at (m = +-1, critical
mode).  The independent cross-check route evaluates the semigroup
representation formula (kernel bracket term, monodromy-inverse term, Duhamel
tail) at sample times using resolvent identities per harmonic, never
quadrature.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import model
from .criticality import CriticalPoint, REGIME_AC
from .dynamics import ModeEvolver, _duhamel_factor
from .errors import AdmissibilityError, SolvabilityError
from .model import Field, Params, Truncation


class PeriodicField:
    """Truncated time-Fourier series of truncated fields.

    coeffs[m + m_max] is the flat spatial coefficient vector of the harmonic
    exp(i m a t); the stored period is 2 pi / a.
    """

    def __init__(self, trunc: Truncation, a: float, m_max: int, eps: float,
                 coeffs: np.ndarray | None = None):
        self.trunc = trunc
        self.a = float(a)
        self.m_max = int(m_max)
        self.eps = float(eps)
        n_rows = 2 * self.m_max + 1
        if coeffs is None:
            coeffs = np.zeros((n_rows, trunc.dim), dtype=complex)
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (n_rows, trunc.dim):
            raise AdmissibilityError(
                f"coeffs shape {coeffs.shape} != ({n_rows}, {trunc.dim})"
            )
        self.coeffs = coeffs

    # -- construction helpers --

    @staticmethod
    def zeros(trunc: Truncation, a: float, m_max: int, eps: float) -> "PeriodicField":
        return PeriodicField(trunc, a, m_max, eps)

    @staticmethod
    def random(trunc: Truncation, a: float, m_max: int, eps: float,
               rng: np.random.Generator, real_valued: bool = True,
               harmonic_decay: float = 1.0) -> "PeriodicField":
        pf = PeriodicField.zeros(trunc, a, m_max, eps)
        for m in range(0, m_max + 1):
            v = rng.standard_normal(trunc.dim) + 1j * rng.standard_normal(trunc.dim)
            v = v / (1.0 + m) ** harmonic_decay
            if m == 0 and real_valued:
                v = v.real.astype(complex)
            pf.coeffs[m + m_max] = v
            if m > 0:
                pf.coeffs[-m + m_max] = np.conj(v) if real_valued else (
                    rng.standard_normal(trunc.dim) + 1j * rng.standard_normal(trunc.dim)
                ) / (1.0 + m) ** harmonic_decay
        return pf

    @staticmethod
    def from_harmonic(trunc: Truncation, a: float, m_max: int, eps: float,
                      m: int, values: np.ndarray) -> "PeriodicField":
        pf = PeriodicField.zeros(trunc, a, m_max, eps)
        pf.coeffs[m + m_max] = values
        return pf

    def harmonic(self, m: int) -> np.ndarray:
        if abs(m) > self.m_max:
            raise AdmissibilityError(f"harmonic {m} beyond truncation {self.m_max}")
        return self.coeffs[m + self.m_max]

    def copy(self) -> "PeriodicField":
        return PeriodicField(self.trunc, self.a, self.m_max, self.eps, self.coeffs.copy())

    def __add__(self, other: "PeriodicField") -> "PeriodicField":
        self._check(other)
        return PeriodicField(self.trunc, self.a, self.m_max, self.eps,
                             self.coeffs + other.coeffs)

    def __sub__(self, other: "PeriodicField") -> "PeriodicField":
        self._check(other)
        return PeriodicField(self.trunc, self.a, self.m_max, self.eps,
                             self.coeffs - other.coeffs)

    def __mul__(self, c: complex) -> "PeriodicField":
        return PeriodicField(self.trunc, self.a, self.m_max, self.eps, self.coeffs * c)

    __rmul__ = __mul__

    def _check(self, other: "PeriodicField"):
        if not self.trunc.same_as(other.trunc) or self.m_max != other.m_max:
            raise AdmissibilityError("mismatched periodic truncations")
        if abs(self.a - other.a) > 1e-12 * max(1.0, abs(self.a)):
            raise AdmissibilityError("mismatched base frequencies")

    def is_real(self, tol: float = 1e-12) -> bool:
        m = self.m_max
        scale = max(float(np.max(np.abs(self.coeffs))), 1e-300)
        for k in range(0, m + 1):
            if np.max(np.abs(self.coeffs[m + k] - np.conj(self.coeffs[m - k]))) > tol * scale:
                return False
        return True

    def dt(self) -> "PeriodicField":
        ms = np.arange(-self.m_max, self.m_max + 1)
        return PeriodicField(self.trunc, self.a, self.m_max, self.eps,
                             (1j * ms * self.a)[:, None] * self.coeffs)

    def at_time(self, t: float) -> Field:
        ms = np.arange(-self.m_max, self.m_max + 1)
        vals = np.sum(np.exp(1j * ms * self.a * t)[:, None] * self.coeffs, axis=0)
        return Field(self.trunc, vals)

    def to_json(self) -> str:
        return json.dumps({
            "a": self.a,
            "M": self.m_max,
            "eps": self.eps,
            "j_max": self.trunc.j_max,
            "k_max": self.trunc.k_max,
            "alpha": self.trunc.alpha,
            "component_order": list(model.COMPONENTS),
            "modes": [{"j": m.j, "k": m.k, "components": list(m.components)}
                      for m in self.trunc.modes],
            "coeffs": [[float(z.real), float(z.imag)] for z in self.coeffs.ravel()],
        })

    @staticmethod
    def from_json(s: str) -> "PeriodicField":
        d = json.loads(s)
        trunc = Truncation(d["j_max"], d["k_max"], d["alpha"])
        flat = np.array([complex(re, im) for re, im in d["coeffs"]], dtype=complex)
        coeffs = flat.reshape(2 * d["M"] + 1, trunc.dim)
        return PeriodicField(trunc, d["a"], d["M"], d["eps"], coeffs)


# -- inner products and norms on periodic fields (time-Parseval) --


def pf_inner_eps(u: PeriodicField, v: PeriodicField, pr: float) -> complex:
    u._check(v)
    t = u.trunc
    w = t.weights_eps(u.eps, pr) * t.nu
    return complex(np.sum(w[None, :] * u.coeffs * np.conj(v.coeffs)))


def pf_norm_eps(u: PeriodicField, pr: float) -> float:
    return float(np.sqrt(max(pf_inner_eps(u, u, pr).real, 0.0)))


def pf_norm_xa(u: PeriodicField, pr: float) -> float:
    """|||u|||_{eps,X_a}: time integral of eps^2||phi||^2 + ||bu||_dual^2
    + eps^6 ||grad phi||^2 + eps^2 ||bu||^2."""
    t = u.trunc
    eps = u.eps
    w = t.weights_fluid(pr) * t.nu / t.sym_mu  # dual weight
    w = w + eps**2 * t.weights_fluid(pr) * t.nu
    wphi = np.where(t.is_phi, t.nu * (eps**2 + eps**6 * t.sym_mu), 0.0)
    total = np.sum((w + wphi)[None, :] * np.abs(u.coeffs) ** 2)
    return float(np.sqrt((2.0 * np.pi / u.a) * total.real))


def pf_norm_ya(u: PeriodicField, pr: float, n_time_samples: int = 64) -> float:
    """|||u|||_{eps,Y_a}: sup_t |||u(t)|||_{eps,X^1}^2 plus the time integral of
    |||grad u|||_eps^2 + eps^2 |||u_t|||_eps^2 + eps^2 ||grad^2 bu||^2
    + eps^6 ||grad phi_t||^2 (sup over a fixed time grid)."""
    t = u.trunc
    eps = u.eps
    ts = np.linspace(0.0, 2.0 * np.pi / u.a, n_time_samples, endpoint=False)
    sup_sq = 0.0
    for tt in ts:
        sup_sq = max(sup_sq, model.norm_eps_x1_sq(u.at_time(tt), eps, pr))
    ms = np.arange(-u.m_max, u.m_max + 1)
    wt = (ms * u.a) ** 2
    w_eps = t.weights_eps(eps, pr) * t.nu
    grad = np.sum((w_eps * t.sym_mu)[None, :] * np.abs(u.coeffs) ** 2)
    ut = eps**2 * np.sum(wt[:, None] * w_eps[None, :] * np.abs(u.coeffs) ** 2)
    w_fluid = t.weights_fluid(pr) * t.nu
    uxx = eps**2 * np.sum((w_fluid * t.sym_mu**2)[None, :] * np.abs(u.coeffs) ** 2)
    wphi = np.where(t.is_phi, t.nu * t.sym_mu, 0.0)
    phit = eps**6 * np.sum(wt[:, None] * wphi[None, :] * np.abs(u.coeffs) ** 2)
    integral = (2.0 * np.pi / u.a) * (grad + ut + uxx + phit).real
    return float(np.sqrt(sup_sq + integral))


# ---------------------------------------------------------------------------
# workspace
# ---------------------------------------------------------------------------


class PeriodicWorkspace:
    """Per-(critical point, truncation) machinery shared by the solvers."""

    def __init__(self, critical: CriticalPoint, trunc: Truncation, m_max: int):
        if critical.regime != REGIME_AC:
            raise AdmissibilityError("periodic solvers need a compressible critical point")
        self.critical = critical
        self.trunc = trunc
        self.m_max = m_max
        self.params: Params = critical.params
        self.eps = critical.eps
        self.a_eps = critical.a
        self.a = critical.metadata.get("inc_a", critical.a)
        self.beta = self.a_eps / self.a
        self.horizon = 2.0 * np.pi / self.a
        self.ev = ModeEvolver(self.params, critical.r1c, self.eps, self.beta, trunc)
        self.u_plus = critical.embedded_u_plus()
        self.u_plus_star = critical.embedded_u_plus_star()
        m = critical.mode_c
        self.crit_slice = trunc.slice_of(m.j, m.k)
        nu = m.basis_norms()[0]
        self.crit_w = m.component_weights(self.eps, self.params.pr) * nu
        # eigenvalue bookkeeping of the critical block of G = M/beta
        lam, v, vinv, rows = self.ev.eigendata(m.j, m.k)
        self.crit_lam, self.crit_v, self.crit_vinv, self.crit_rows = lam, v, vinv, rows
        self.i_plus = int(np.argmin(np.abs(lam - 1j * self.a)))
        self.i_minus = int(np.argmin(np.abs(lam + 1j * self.a)))

    def new_field(self) -> PeriodicField:
        return PeriodicField.zeros(self.trunc, self.a, self.m_max, self.eps)

    def bracket(self, u: PeriodicField, sign: int) -> complex:
        """[u]_{+-,eps} = (u_hat_{+-1}, u_{+-}^*)_eps (time Parseval picks the
        +-1 harmonic)."""
        vec = u.harmonic(sign)[self.crit_slice]
        ustar = self.u_plus_star if sign > 0 else np.conj(self.u_plus_star)
        return complex(np.sum(self.crit_w * vec * np.conj(ustar)))

    def z_field(self, sign: int) -> PeriodicField:
        pf = self.new_field()
        vec = self.u_plus if sign > 0 else np.conj(self.u_plus)
        pf.coeffs[sign + self.m_max][self.crit_slice] = vec
        return pf

    def z_star_field(self, sign: int) -> PeriodicField:
        pf = self.new_field()
        vec = self.u_plus_star if sign > 0 else np.conj(self.u_plus_star)
        pf.coeffs[sign + self.m_max][self.crit_slice] = vec
        return pf

    def spatial_bracket(self, f: Field, sign: int) -> complex:
        vec = f.values[self.crit_slice]
        ustar = self.u_plus_star if sign > 0 else np.conj(self.u_plus_star)
        return complex(np.sum(self.crit_w * vec * np.conj(ustar)))

    def apply_B(self, u: PeriodicField, omega: float = 0.0) -> PeriodicField:
        """B(omega) u = beta (1+omega) u_t + L u per harmonic."""
        out = self.new_field()
        ms = np.arange(-self.m_max, self.m_max + 1)
        lu = -apply_blocks(self.ev.bs, self.trunc, u.coeffs)
        out.coeffs = (1j * ms * self.a_eps * (1.0 + omega))[:, None] * u.coeffs + lu
        return out


def apply_blocks(bs, trunc: Truncation, states: np.ndarray) -> np.ndarray:
    """Generator blocks applied samplewise: (..., dim) -> M @ values."""
    out = np.zeros_like(states)
    if trunc.full_rows.size:
        x = states[..., trunc.full_rows]
        y = np.einsum("mij,smj->smi", bs.full, x.reshape(-1, *x.shape[-2:]))
        out[..., trunc.full_rows.ravel()] = y.reshape(*states.shape[:-1], -1)
    if trunc.acoustic_rows.size:
        x = states[..., trunc.acoustic_rows]
        y = np.einsum("mij,smj->smi", bs.acoustic, x.reshape(-1, *x.shape[-2:]))
        out[..., trunc.acoustic_rows.ravel()] = y.reshape(*states.shape[:-1], -1)
    if trunc.scalar_rows.size:
        x = states[..., trunc.scalar_rows]
        y = x * bs.scalar_diag[None, :, :]
        out[..., trunc.scalar_rows.ravel()] = y.reshape(*states.shape[:-1], -1)
    return out


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------


@dataclass
class ProjectionReport:
    bracket_plus: complex
    bracket_minus: complex
    p_part: PeriodicField
    q_part: PeriodicField


def projections(u: PeriodicField, critical: CriticalPoint) -> ProjectionReport:
    """Kernel projections of the periodic generator: P u = [u]_+ z_+ + [u]_- z_-."""
    ws = PeriodicWorkspace(critical, u.trunc, u.m_max)
    if abs(u.a - ws.a) > 1e-9 * max(1.0, ws.a):
        raise AdmissibilityError(
            f"base frequency {u.a} does not match the critical frequency {ws.a}"
        )
    bp = ws.bracket(u, +1)
    bm = ws.bracket(u, -1)
    p = bp * ws.z_field(+1) + bm * ws.z_field(-1)
    q = u - p
    return ProjectionReport(bracket_plus=bp, bracket_minus=bm, p_part=p, q_part=q)


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------


@dataclass
class PeriodicSolveResult:
    u: PeriodicField
    residual: float
    rep_discrepancy: float | None
    flags: list = field(default_factory=list)


def _diag_solve(ws: PeriodicWorkspace, f: PeriodicField, shifts: np.ndarray,
                deflate_harmonics: dict) -> PeriodicField:
    """Solve (shift_m I - M) u_m = f_m per harmonic and mode.

    shifts has one complex entry per harmonic row; deflate_harmonics maps a
    harmonic m to the eigen index of the critical block to deflate there.
    """
    trunc, ev = ws.trunc, ws.ev
    out = ws.new_field()
    scale = ev.scale
    fbal = f.coeffs * scale[None, :]
    for row, shift in enumerate(shifts):
        m = row - ws.m_max
        ybal = np.zeros(trunc.dim, dtype=complex)
        for g in ev.groups:
            rows = g["rows"]
            lam_m = g["lam"] * ws.beta  # eigenvalues of the balanced block M
            rhs = fbal[row][rows]
            if g["v"] is None:
                denom = shift - lam_m
                ybal[rows.ravel()] = (rhs / denom).ravel()
                continue
            c = np.einsum("mij,mj->mi", g["vinv"], rhs)
            denom = shift - lam_m
            if m in deflate_harmonics:
                # avoid a 0/0 before zeroing the kernel coefficient below
                hit0 = np.nonzero(rows[:, 0] == ws.crit_rows[0])[0]
                if hit0.size:
                    denom = denom.copy()
                    denom[int(hit0[0]), deflate_harmonics[m]] = 1.0
            y = c / denom
            # deflation of the kernel direction at the critical block
            if m in deflate_harmonics:
                hit = np.nonzero(rows[:, 0] == ws.crit_rows[0])[0]
                if hit.size:
                    i_mode = int(hit[0])
                    idx = deflate_harmonics[m]
                    y[i_mode, idx] = 0.0
            ybal[rows.ravel()] = np.einsum("mij,mj->mi", g["v"], y).ravel()
        out.coeffs[row] = ybal / scale
    return out


def solve_Beps(
    f: PeriodicField,
    critical: CriticalPoint,
    tol_solvability: float = 1e-12,
    cross_check: bool = True,
    n_check_times: int = 8,
) -> PeriodicSolveResult:
    """Unique solution of B u = f in the complement of the kernel.

    Rejects data with nonzero kernel brackets (the solvability condition);
    optionally evaluates the semigroup representation formula as an
    independent route and reports the discrepancy.
    """
    ws = PeriodicWorkspace(critical, f.trunc, f.m_max)
    bp, bm = ws.bracket(f, +1), ws.bracket(f, -1)
    if max(abs(bp), abs(bm)) > tol_solvability:
        raise SolvabilityError(
            f"solvability condition violated: |[F]_+| = {abs(bp):.3e}, "
            f"|[F]_-| = {abs(bm):.3e} > {tol_solvability:.1e}"
        )
    ms = np.arange(-ws.m_max, ws.m_max + 1)
    shifts = 1j * ms * ws.a_eps
    u = _diag_solve(ws, f, shifts, {+1: ws.i_plus, -1: ws.i_minus})
    bu = ws.apply_B(u)
    resid = pf_norm_eps(bu - f, ws.params.pr)
    fnorm = max(pf_norm_eps(f, ws.params.pr), 1e-300)
    result = PeriodicSolveResult(u=u, residual=resid / fnorm, rep_discrepancy=None)
    if cross_check:
        times = np.linspace(0.0, ws.horizon, n_check_times, endpoint=False)
        rep = _representation_formula(ws, f, times)
        diff = 0.0
        ref = 0.0
        for ti, t in enumerate(times):
            du = u.at_time(t).values - rep[ti]
            diff = max(diff, float(np.max(np.abs(du))))
            ref = max(ref, float(np.max(np.abs(rep[ti]))))
        result.rep_discrepancy = diff / max(ref, 1e-300)
    return result


def _monodromy_inverse_Q(ws: PeriodicWorkspace, values: np.ndarray,
                         shift: complex) -> np.ndarray:
    """[(I - e^{T (G - shift)}) Q]^{-1} applied to a flat balanced vector whose
    critical-direction content is (numerically) zero."""
    ev, trunc = ws.ev, ws.trunc
    out = np.zeros_like(values)
    T = ws.horizon
    for g in ev.groups:
        rows = g["rows"]
        lam_s = g["lam"] - shift
        rho = np.exp(T * lam_s)
        rhs = values[rows]
        if g["v"] is None:
            out[rows.ravel()] = (rhs / (1.0 - rho)).ravel()
            continue
        c = np.einsum("mij,mj->mi", g["vinv"], rhs)
        hit = np.nonzero(rows[:, 0] == ws.crit_rows[0])[0]
        denom = 1.0 - rho
        if hit.size:
            i_mode = int(hit[0])
            for idx in (ws.i_plus, ws.i_minus):
                c[i_mode, idx] = 0.0
                denom[i_mode, idx] = 1.0
        y = c / denom
        out[rows.ravel()] = np.einsum("mij,mj->mi", g["v"], y).ravel()
    return out


def _representation_formula(ws: PeriodicWorkspace, f: PeriodicField,
                            times: np.ndarray, lam: complex = 0.0) -> np.ndarray:
    """Evaluate the semigroup representation of the periodic solution at the
    given times (lam = 0: the kernel-complement solver; lam != 0 contributes
    the resolvent's pole prefactor instead of the s-weighted kernel term).

    Returns an array (n_times, dim) of unbalanced coefficient vectors.
    """
    ev, trunc = ws.ev, ws.trunc
    T = ws.horizon
    shift = lam / ws.beta
    ms = np.arange(-ws.m_max, ws.m_max + 1)
    scale = ev.scale
    fbal = f.coeffs * scale[None, :]

    out = np.zeros((times.size, trunc.dim), dtype=complex)
    for g in ev.groups:
        rows = g["rows"]
        lam_s = g["lam"] - shift
        if g["v"] is None:
            gm = fbal[:, rows] / ws.beta
        else:
            gm = np.einsum("mij,Hmj->Hmi", g["vinv"], fbal[:, rows]) / ws.beta
        # integral over one period of the shifted semigroup against f
        y_int = np.zeros(lam_s.shape, dtype=complex)
        for hrow, m in enumerate(ms):
            y_int += gm[hrow] * _duhamel_factor(lam_s, 1j * m * ws.a, T)
        rho = np.exp(T * lam_s)
        denom = 1.0 - rho
        hit = np.nonzero(rows[:, 0] == ws.crit_rows[0])[0] if g["v"] is not None else []
        if len(hit):
            i_mode = int(hit[0])
            if lam == 0.0:
                for idx in (ws.i_plus, ws.i_minus):
                    y_int[i_mode, idx] = 0.0
                    denom[i_mode, idx] = 1.0
        c = y_int / denom
        for ti, t in enumerate(times):
            # monodromy-inverse term propagated to time t, plus the Duhamel tail
            y = c * np.exp(lam_s * t)
            for hrow, m in enumerate(ms):
                y += gm[hrow] * _duhamel_factor(lam_s, 1j * m * ws.a, t)
            if g["v"] is None:
                out[ti][rows.ravel()] += y.ravel()
            else:
                out[ti][rows.ravel()] += np.einsum("mij,mj->mi", g["v"], y).ravel()
    for ti in range(times.size):
        out[ti] = out[ti] / scale

    if lam == 0.0:
        # kernel-harmonic contribution of the s-weighted kernel projection
        bp = 0.0 + 0.0j
        bm = 0.0 + 0.0j
        for m in ms:
            fp = complex(np.sum(ws.crit_w * f.harmonic(m)[ws.crit_slice]
                                * np.conj(ws.u_plus_star)))
            fm = complex(np.sum(ws.crit_w * f.harmonic(m)[ws.crit_slice]
                                * np.conj(np.conj(ws.u_plus_star))))
            cp = np.pi / ws.a if m == 1 else 1.0 / (1j * (m - 1) * ws.a)
            cm = np.pi / ws.a if m == -1 else 1.0 / (1j * (m + 1) * ws.a)
            bp += fp * cp
            bm += fm * cm
        for ti, t in enumerate(times):
            vec = (bp * np.exp(1j * ws.a * t) * ws.u_plus
                   + bm * np.exp(-1j * ws.a * t) * np.conj(ws.u_plus))
            out[ti][ws.crit_slice] += vec / ws.beta
    else:
        pole = 2.0 * np.pi / (ws.a_eps * (1.0 - np.exp(-2.0 * np.pi * lam / ws.a_eps)))
        bp, bm = _resolvent_brackets(ws, f, lam)
        for ti, t in enumerate(times):
            phase = np.exp(-lam * t / ws.beta)
            vec = phase * (bp * np.exp(1j * ws.a * t) * ws.u_plus
                           + bm * np.exp(-1j * ws.a * t) * np.conj(ws.u_plus))
            out[ti][ws.crit_slice] += pole * vec
    return out


def _resolvent_brackets(ws: PeriodicWorkspace, f: PeriodicField, lam: complex):
    """[e^{-(a/a_eps) lam (T - s)} F]_{+-,eps} in closed form per harmonic."""
    T = ws.horizon
    ms = np.arange(-ws.m_max, ws.m_max + 1)
    bp = 0.0 + 0.0j
    bm = 0.0 + 0.0j
    pref = ws.a / (2.0 * np.pi) * np.exp(-lam * T / ws.beta)
    for m in ms:
        fp = complex(np.sum(ws.crit_w * f.harmonic(m)[ws.crit_slice]
                            * np.conj(ws.u_plus_star)))
        fm = complex(np.sum(ws.crit_w * f.harmonic(m)[ws.crit_slice]
                            * np.conj(np.conj(ws.u_plus_star))))
        zp = lam / ws.beta + 1j * (m - 1) * ws.a
        zm = lam / ws.beta + 1j * (m + 1) * ws.a
        bp += fp * pref * _int_e(zp, T)
        bm += fm * pref * _int_e(zm, T)
    return bp, bm


def _int_e(z: complex, T: float) -> complex:
    if abs(z) < 1e-12:
        return T
    return (np.exp(z * T) - 1.0) / z


@dataclass
class ResolventReport:
    u: PeriodicField
    pole_prefactor: float
    bracket_term: float
    regular_term: float
    rep_discrepancy: float | None


def resolvent_Beps(
    lam: complex,
    f: PeriodicField,
    critical: CriticalPoint,
    cross_check: bool = False,
    n_check_times: int = 6,
) -> ResolventReport:
    """(lam + B)^{-1} f by per-harmonic inversion, with the pole/regular bound
    decomposition; lam may not sit on the lattice i k a_eps."""
    ws = PeriodicWorkspace(critical, f.trunc, f.m_max)
    kappa1 = critical.gap
    if lam.real <= -ws.beta * kappa1:
        raise AdmissibilityError(
            f"Re lambda = {lam.real:.3g} outside the resolvent strip (> {-ws.beta * kappa1:.3g})"
        )
    ks = np.arange(-ws.m_max - 2, ws.m_max + 3)
    if np.min(np.abs(lam - 1j * ks * ws.a_eps)) < 1e-10:
        raise SolvabilityError(f"lambda = {lam} within 1e-10 of the pole lattice i k a_eps")
    ms = np.arange(-ws.m_max, ws.m_max + 1)
    shifts = lam + 1j * ms * ws.a_eps
    u = _diag_solve(ws, f, shifts, {})
    bp, bm = _resolvent_brackets(ws, f, lam)
    pole = abs(2.0 * np.pi / (ws.a_eps * (1.0 - np.exp(-2.0 * np.pi * lam / ws.a_eps))))
    bracket_term = pole * (abs(bp) + abs(bm))
    regular = pf_norm_xa(f, ws.params.pr)
    rep = None
    if cross_check:
        times = np.linspace(0.0, ws.horizon, n_check_times, endpoint=False)
        vals = _representation_formula(ws, f, times, lam=lam)
        diff, ref = 0.0, 0.0
        for ti, t in enumerate(times):
            du = u.at_time(t).values - vals[ti]
            diff = max(diff, float(np.max(np.abs(du))))
            ref = max(ref, float(np.max(np.abs(vals[ti]))))
        rep = diff / max(ref, 1e-300)
    return ResolventReport(u=u, pole_prefactor=pole, bracket_term=bracket_term,
                           regular_term=regular, rep_discrepancy=rep)


def solve_Beps_omega(
    f: PeriodicField,
    omega: float,
    critical: CriticalPoint,
    tol_solvability: float = 1e-12,
) -> PeriodicSolveResult:
    """Unique solution of B(omega) u = f in the kernel complement, uniformly
    for |omega| <= 1/4."""
    if abs(omega) > 0.25:
        raise AdmissibilityError(f"|omega| must be <= 1/4, got {omega}")
    ws = PeriodicWorkspace(critical, f.trunc, f.m_max)
    bp, bm = ws.bracket(f, +1), ws.bracket(f, -1)
    if max(abs(bp), abs(bm)) > tol_solvability:
        raise SolvabilityError(
            f"solvability condition violated: |[F]_+-| = {max(abs(bp), abs(bm)):.3e}"
        )
    flags = []
    ms = np.arange(-ws.m_max, ws.m_max + 1)

    def all_shifts(om):
        return 1j * ms * ws.a_eps * (1.0 + om)

    def clash(om: float) -> bool:
        # deflated kernel directions at m = +-1 do not count as resonance
        for g in ws.ev.groups:
            lam_m = g["lam"] * ws.beta
            for row, sh in enumerate(all_shifts(om)):
                m = row - ws.m_max
                near = np.abs(sh - lam_m) < 1e-9 * (1.0 + np.abs(lam_m))
                if m in (+1, -1) and g["v"] is not None:
                    hit = np.nonzero(g["rows"][:, 0] == ws.crit_rows[0])[0]
                    if hit.size:
                        idx = ws.i_plus if m == 1 else ws.i_minus
                        near[int(hit[0]), idx] = False
                if np.any(near):
                    return True
        return False

    # accidental resonance of a non-kernel block is measure zero in omega;
    # nudge and warn instead of failing
    omega_eff = omega
    if clash(omega_eff):
        warnings.warn(
            f"accidental harmonic resonance at omega={omega_eff}; perturbing by 1e-9",
            stacklevel=2,
        )
        flags.append("omega_perturbed")
        omega_eff = omega_eff + 1e-9

    # the kernel-adjacent directions at m = +-1 are removed for every omega;
    # at omega = 0 they are exactly singular, otherwise ~ |omega| a_eps
    u = _diag_solve(ws, f, all_shifts(omega_eff),
                    {+1: ws.i_plus, -1: ws.i_minus})
    bu = ws.apply_B(u, omega=omega_eff)
    resid = pf_norm_eps(bu - f, ws.params.pr)
    fnorm = max(pf_norm_eps(f, ws.params.pr), 1e-300)
    return PeriodicSolveResult(u=u, residual=resid / fnorm, rep_discrepancy=None,
                               flags=flags)


def kernel_adjacent_sv(omega: float, critical: CriticalPoint, trunc: Truncation) -> float:
    """Smallest singular value of the (m = +1, critical mode) block of
    B(omega); scales like |omega| a_eps near 0."""
    ws = PeriodicWorkspace(critical, trunc, 1)
    lam_m = ws.crit_lam * ws.beta
    sh = 1j * ws.a_eps * (1.0 + omega)
    n = len(lam_m)
    a = sh * np.eye(n) - (ws.crit_v @ np.diag(lam_m) @ ws.crit_vinv)
    return float(np.linalg.svd(a, compute_uv=False)[-1])


@dataclass
class MonodromyProbe:
    mu: complex
    omega: float
    inverse_norm: float
    bound: float


def monodromy_resolvent_probe(
    mu: complex,
    eps: float,
    omega: float,
    critical: CriticalPoint,
    trunc: Truncation,
    r: float = 0.1,
) -> MonodromyProbe:
    """Norm of (mu - V_omega(2 pi/a))^{-1} over the truncation, in the
    balanced metric, compared against C (1/r + 1/|mu|).

    Requires |mu - 1| >= r, |mu| >= exp(-(3/4) kappa1 T), |omega| <= r/(4 pi);
    mu within 1e-9 of an actual monodromy eigenvalue is rejected.
    """
    ws = PeriodicWorkspace(critical, trunc, 1)
    if abs(eps - critical.eps) > 1e-12:
        raise AdmissibilityError("eps must match the critical point")
    kappa1 = critical.gap
    T = ws.horizon
    if abs(mu - 1.0) < r:
        raise AdmissibilityError(f"|mu - 1| = {abs(mu - 1.0):.3g} < r = {r}")
    if abs(mu) < np.exp(-0.75 * kappa1 * T):
        raise AdmissibilityError(f"|mu| below the probe floor exp(-3 kappa1 T/4)")
    omega_r = r / (4.0 * np.pi)
    if abs(omega) > omega_r:
        raise AdmissibilityError(f"|omega| = {abs(omega)} exceeds omega_r = {omega_r:.3g}")

    worst = 0.0
    for g in ws.ev.groups:
        lam_om = g["lam"] / (1.0 + omega)
        rho = np.exp(T * lam_om)
        if np.min(np.abs(mu - rho)) < 1e-9:
            raise SolvabilityError(f"mu = {mu} within 1e-9 of a monodromy eigenvalue")
        if g["v"] is None:
            worst = max(worst, float(np.max(1.0 / np.abs(mu - rho))))
            continue
        n = g["lam"].shape[1]
        for i in range(g["lam"].shape[0]):
            a = mu * np.eye(n) - g["v"][i] @ np.diag(rho[i]) @ g["vinv"][i]
            inv = np.linalg.inv(a)
            worst = max(worst, float(np.linalg.norm(inv, 2)))
    return MonodromyProbe(mu=mu, omega=omega, inverse_norm=worst,
                          bound=1.0 / r + 1.0 / abs(mu))


@dataclass
class FixedPointResult:
    u: Field
    p_factor: complex
    neumann_ratio: float | None


def fixed_point_solve(
    lam: complex,
    f: Field,
    critical: CriticalPoint,
    trunc: Truncation | None = None,
    neumann_terms: int = 0,
) -> FixedPointResult:
    """Solve (I - e^{-2 pi lam/a_eps} V_0(2 pi/a)) u = f.

    The kernel part is scaled by (1 - e^{-2 pi lam/a_eps})^{-1}; when that
    factor vanishes the datum must have no kernel component.  The complement
    is inverted directly per mode; optionally the Neumann partial sums are
    evaluated and their geometric ratio returned.
    """
    trunc = trunc or f.trunc
    ws = PeriodicWorkspace(critical, trunc, 1)
    kappa1 = critical.gap
    if lam.real <= -ws.beta * kappa1:
        raise AdmissibilityError("Re lambda outside the contraction strip")
    factor = 1.0 - np.exp(-2.0 * np.pi * lam / ws.a_eps)
    bp = ws.spatial_bracket(f, +1)
    bm = ws.spatial_bracket(f, -1)
    shift = lam / ws.beta

    if abs(factor) < 1e-12:
        if max(abs(bp), abs(bm)) > 1e-10 * max(1.0, float(np.max(np.abs(f.values)))):
            raise SolvabilityError(
                "solvability violated: e^{2 pi lam/a_eps} = 1 with nonzero kernel data"
            )
        p_vals = np.zeros(trunc.dim, dtype=complex)
    else:
        p_vals = np.zeros(trunc.dim, dtype=complex)
        p_vals[ws.crit_slice] = (bp * ws.u_plus + bm * np.conj(ws.u_plus)) / factor

    qf = f.values.copy()
    qf[ws.crit_slice] -= bp * ws.u_plus + bm * np.conj(ws.u_plus)
    qbal = qf * ws.ev.scale
    qsol = _monodromy_inverse_Q(ws, qbal, shift) / ws.ev.scale
    u = Field(trunc, p_vals + qsol)

    ratio = None
    if neumann_terms >= 3:
        # partial sums of sum_n (e^{-T lam_shift} V)^n Q f
        terms = [qbal.copy()]
        cur = qbal.copy()
        for _ in range(neumann_terms):
            cur = _apply_shifted_monodromy(ws, cur, shift)
            terms.append(cur.copy())
        increments = [float(np.linalg.norm(t)) for t in terms[1:]]
        ratios = [increments[i + 1] / increments[i] for i in range(len(increments) - 1)
                  if increments[i] > 0]
        ratio = float(np.median(ratios)) if ratios else 0.0
    return FixedPointResult(u=u, p_factor=factor, neumann_ratio=ratio)


def _apply_shifted_monodromy(ws: PeriodicWorkspace, values: np.ndarray,
                             shift: complex) -> np.ndarray:
    """e^{T (G - shift)} Q applied to a flat balanced vector."""
    out = np.zeros_like(values)
    T = ws.horizon
    for g in ws.ev.groups:
        rows = g["rows"]
        rho = np.exp(T * (g["lam"] - shift))
        if g["v"] is None:
            out[rows.ravel()] = (values[rows] * rho).ravel()
            continue
        c = np.einsum("mij,mj->mi", g["vinv"], values[rows])
        hit = np.nonzero(rows[:, 0] == ws.crit_rows[0])[0]
        if hit.size:
            i_mode = int(hit[0])
            c[i_mode, ws.i_plus] = 0.0
            c[i_mode, ws.i_minus] = 0.0
        out[rows.ravel()] = np.einsum("mij,mj->mi", g["v"], c * rho).ravel()
    return out


def inc_kernel_dimension(params: Params, r1c: float, a: float, trunc: Truncation,
                         m_max: int, tol: float = 1e-8) -> tuple[int, float]:
    """Rank deficiency of the incompressible periodic generator over all
    (harmonic, mode) blocks: returns (kernel dimension, smallest nonzero
    singular value across blocks)."""
    bs = model.assemble_blocks(trunc, params, r1c, None)
    dim = 0
    min_sv = np.inf
    for m in range(-m_max, m_max + 1):
        sh = 1j * m * a
        for i, md in enumerate(trunc.full_modes):
            blk = sh * np.eye(3) - bs.full[i]
            sv = np.linalg.svd(blk, compute_uv=False)
            scale = max(sv[0], 1.0)
            null = int(np.sum(sv < tol * scale))
            dim += null
            nz = sv[sv >= tol * scale]
            if nz.size:
                min_sv = min(min_sv, float(nz[-1]))
        for i, md in enumerate(trunc.scalar_modes):
            vals = np.abs(sh - bs.scalar_diag[i])
            dim += int(np.sum(vals < tol))
            nz = vals[vals >= tol]
            if nz.size:
                min_sv = min(min_sv, float(np.min(nz)))
    return dim, min_sv
