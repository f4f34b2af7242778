"""Oscillatory/stationary onset thresholds, critical-point location for the
incompressible and artificially compressible generators, transversality, and
the small-parameter convergence-rate study.

For the reduced 3x3 block with s = Pr*mu, t = mu, u = d*mu and Leray factor
q = a^2/mu, the characteristic polynomial is

    lambda^3 + A lambda^2 + B lambda + C,
    A = s + t + u
    B = st + su + tu - Pr q (R1^2 - R2^2)
    C = stu - Pr q (u R1^2 - t R2^2).

Oscillatory onset: A B = C with B > 0 (crossing pair +-i sqrt(B)); stationary
onset: C = 0 (exchange of stabilities).  Both are linear in R1^2.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import model
from .errors import AdmissibilityError, AssemblyError, ConvergenceFailure, TruncationError
from .model import (
    Field,
    Mode,
    Params,
    Truncation,
    WHICH_AC,
    WHICH_AC_ADJOINT,
    WHICH_INC,
    WHICH_K,
    WHICH_K_INC,
    assemble,
    assemble_blocks,
    balance_full,
    balance_inc,
    balanced,
    spectral_abscissa_all,
    mu_min_outside,
    tail_abscissa_bound,
)

REGIME_INC = "INC"
REGIME_AC = "AC"

_THETA_IDX = {REGIME_INC: 1, REGIME_AC: 3}  # index of theta in the block coordinates


# ---------------------------------------------------------------------------
# closed-form thresholds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OscillatoryThreshold:
    r1_sq: float
    a_sq: float

    @property
    def oscillatory(self) -> bool:
        return self.a_sq > 0.0


def _stu(params: Params, mode: Mode) -> tuple[float, float, float]:
    mu = mode.mu
    return params.pr * mu, mu, params.d * mu


def inc_oscillatory_threshold(params: Params, mode: Mode) -> OscillatoryThreshold:
    """Solve A*B = C for R1^2; a_sq = B there.

    a_sq <= 0 flags "no oscillatory onset at this mode"; the value is still
    returned so sign-change scans over parameters remain possible.
    """
    params.require_hopf_admissible()
    if mode.kind != model.KIND_FULL:
        raise AssemblyError(f"oscillatory threshold needs a full mode, got {mode.kind}")
    s, t, u = _stu(params, mode)
    q = mode.q
    pr, r2sq = params.pr, params.r2**2
    r1_sq = ((s + t + u) * (s * t + s * u + t * u) - s * t * u + pr * q * r2sq * (s + u)) / (
        pr * q * (s + t)
    )
    a_sq = (s * t + s * u + t * u) - pr * q * (r1_sq - r2sq)
    return OscillatoryThreshold(r1_sq=float(r1_sq), a_sq=float(a_sq))


def inc_stationary_threshold(params: Params, mode: Mode) -> float:
    """R1^2 at exchange of stabilities: mu^3/a^2 + R2^2/d."""
    if mode.kind != model.KIND_FULL:
        raise AssemblyError(f"stationary threshold needs a full mode, got {mode.kind}")
    s, t, u = _stu(params, mode)
    return float(s * t / (params.pr * mode.q) + (t / u) * params.r2**2)


@dataclass(frozen=True)
class SalinityWindow:
    """Interval of r2 values at a fixed mode where the oscillatory onset both
    exists (a^2 > 0) and preempts the stationary one.  The two sign conditions
    flip at the same point (B = 0 forces C = 0 on the threshold line), so both
    bisection roots are reported; the upper end is open at the scanned maximum
    when neither condition fails below it."""

    r2_lower: float
    r2_upper: float
    open_at_max: bool
    lower_from_a_sq: float
    lower_from_preempt: float


def salinity_window(
    params: Params, mode: Mode, r2_max: float, xtol: float = 1e-10
) -> SalinityWindow:
    def with_r2(r2: float) -> Params:
        return Params(pr=params.pr, d=params.d, r2=r2, alpha=params.alpha)

    def f_a_sq(r2: float) -> float:
        return inc_oscillatory_threshold(with_r2(r2), mode).a_sq

    def f_preempt(r2: float) -> float:
        p = with_r2(r2)
        return inc_stationary_threshold(p, mode) - inc_oscillatory_threshold(p, mode).r1_sq

    def bisect(f) -> float:
        lo, hi = 0.0, r2_max
        flo, fhi = f(lo), f(hi)
        if flo > 0:
            return 0.0
        if fhi < 0:
            return np.inf
        while hi - lo > xtol:
            mid = 0.5 * (lo + hi)
            if f(mid) > 0:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    lower_a = bisect(f_a_sq)
    lower_p = bisect(f_preempt)
    lower = max(lower_a, lower_p)
    if not np.isfinite(lower):
        raise AdmissibilityError(f"no oscillatory window below r2 = {r2_max}")
    return SalinityWindow(
        r2_lower=float(lower),
        r2_upper=float(r2_max),
        open_at_max=True,
        lower_from_a_sq=float(lower_a),
        lower_from_preempt=float(lower_p),
    )


# ---------------------------------------------------------------------------
# weighted eigenpairs on one block
# ---------------------------------------------------------------------------


def _refine_vector(mt: np.ndarray, lam: complex, v: np.ndarray, adjoint: bool) -> np.ndarray:
    """One inverse-iteration step with the computed eigenvalue as shift.

    For the adjoint the iteration matrix is (M - lam I)^H, whose near-null
    direction is the left eigenvector of lam itself.
    """
    n = mt.shape[0]
    base = mt - lam * np.eye(n)
    a = base.conj().T if adjoint else base
    jitter = 1e-13 * max(np.linalg.norm(mt, np.inf), 1.0)
    try:
        x = scipy.linalg.solve(a + jitter * np.eye(n), v)
    except scipy.linalg.LinAlgError:
        return v
    nrm = np.linalg.norm(x)
    if not np.isfinite(nrm) or nrm == 0.0:
        return v
    return x / nrm


def weighted_eigenpair(
    block: np.ndarray,
    s_balance: np.ndarray,
    nu: float,
    target: complex,
    theta_idx: int,
    refine: bool = True,
) -> tuple[complex, np.ndarray, np.ndarray]:
    """Eigenvalue nearest to target with right vector v and weighted-adjoint
    vector vstar, normalized so the theta component of v is 1 and
    (v, vstar)_W = 1 with W = diag(s_balance^2) * nu."""
    mt = balanced(block, s_balance)
    w, vl, vr = scipy.linalg.eig(mt, left=True, right=True)
    i = int(np.argmin(np.abs(w - target)))
    lam = w[i]
    others = np.delete(w, i)
    if others.size and np.min(np.abs(others - lam)) < 1e-8 * max(1.0, np.abs(lam)):
        raise ConvergenceFailure(
            f"eigenvalue {lam} nearly degenerate; weighted pair ill-defined"
        )
    y = vr[:, i] / np.linalg.norm(vr[:, i])
    yl = vl[:, i] / np.linalg.norm(vl[:, i])
    if refine:
        y = _refine_vector(mt, lam, y, adjoint=False)
        yl = _refine_vector(mt, lam, yl, adjoint=True)
        lam = np.vdot(yl, mt @ y) / np.vdot(yl, y)

    v = y / s_balance
    if v[theta_idx] == 0:
        raise ConvergenceFailure("eigenvector has vanishing theta component")
    scale = v[theta_idx]
    v = v / scale
    y = y / scale
    pairing = nu * np.vdot(yl, y)  # = (v, vstar0)_W for vstar0 = yl / s_balance
    if np.abs(pairing) < 1e-12:
        raise ConvergenceFailure("left/right pairing numerically defective")
    vstar = (yl / s_balance) / np.conj(pairing)
    return complex(lam), v, vstar


# ---------------------------------------------------------------------------
# critical points
# ---------------------------------------------------------------------------


@dataclass
class CriticalPoint:
    """Located loss of stability of the motionless state.

    ``u_plus``/``u_plus_star`` are coefficient vectors on the critical mode in
    the regime's natural coordinates ((w2, theta, psi) for INC, all five for
    AC), normalized so theta = 1 and (u_plus, u_plus_star)_w = 1 in the
    regime's weighted inner product (basis norm included).  ``transversality``
    is d lambda_+/d eta at eta = 0.
    """

    regime: str
    params: Params
    r1c: float
    a: float
    mode_c: Mode
    u_plus: np.ndarray
    u_plus_star: np.ndarray
    transversality: complex
    gap: float
    eps: float | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def u_minus(self) -> np.ndarray:
        return np.conj(self.u_plus)

    @property
    def u_minus_star(self) -> np.ndarray:
        return np.conj(self.u_plus_star)

    @property
    def lambda_plus(self) -> complex:
        return 1j * self.a

    def weight_vector(self) -> np.ndarray:
        """Diagonal of the weighted inner product on the critical block,
        including the basis norm."""
        m = self.mode_c
        nu = m.basis_norms()[0]
        if self.regime == REGIME_AC:
            return m.component_weights(self.eps, self.params.pr) * nu
        return model.inc_weight_vector(m, self.params) * nu

    def embedded_u_plus(self) -> np.ndarray:
        """Five-component representation (INC eigenvectors get w1 from the
        divergence-free relation and the pressure from the w1 momentum row)."""
        if self.regime == REGIME_AC:
            return self.u_plus.copy()
        return embed_inc_vector(self.u_plus, self.mode_c, self.params, self.lambda_plus)

    def embedded_u_plus_star(self) -> np.ndarray:
        if self.regime == REGIME_AC:
            return self.u_plus_star.copy()
        return embed_inc_adjoint(
            self.u_plus_star, self.mode_c, self.params, np.conj(self.lambda_plus)
        )

    def field_u_plus(self, trunc: Truncation) -> Field:
        f = Field.zeros(trunc)
        f.values[trunc.slice_of(self.mode_c.j, self.mode_c.k)] = self.embedded_u_plus()
        return f

    def field_u_plus_star(self, trunc: Truncation) -> Field:
        f = Field.zeros(trunc)
        f.values[trunc.slice_of(self.mode_c.j, self.mode_c.k)] = self.embedded_u_plus_star()
        return f

    def check_normalization(self, tol: float = 1e-10):
        w = self.weight_vector()
        if self.regime == REGIME_INC:
            up, us = self.u_plus, self.u_plus_star
        else:
            up, us = self.u_plus, self.u_plus_star
        ip = np.sum(w * up * np.conj(us))
        if abs(ip - 1.0) > tol:
            raise AdmissibilityError(f"critical pair not biorthonormalized: (u+,u+*) = {ip}")


def embed_inc_vector(u3: np.ndarray, mode: Mode, params: Params, lam: complex) -> np.ndarray:
    """(w2, theta, psi) -> (phi, w1, w2, theta, psi) with w1 = -(b/a) w2 and the
    associated pressure phi = (lam + Pr mu) w1 / (Pr a)."""
    a, b, mu = mode.a, mode.b, mode.mu
    w2, theta, psi = u3
    w1 = -(b / a) * w2
    phi = (lam + params.pr * mu) * w1 / (params.pr * a)
    return np.array([phi, w1, w2, theta, psi], dtype=complex)


def embed_inc_adjoint(u3: np.ndarray, mode: Mode, params: Params, lam_star: complex) -> np.ndarray:
    """Adjoint counterpart; the adjoint w1 momentum row gives
    phi* = -(lam* + Pr mu) w1* / (Pr a)."""
    a, b, mu = mode.a, mode.b, mode.mu
    w2, theta, psi = u3
    w1 = -(b / a) * w2
    phi = -(lam_star + params.pr * mu) * w1 / (params.pr * a)
    return np.array([phi, w1, w2, theta, psi], dtype=complex)


def _gap_excluding_pair(
    params: Params,
    trunc: Truncation,
    r1: float,
    eps: float | None,
    crit_mode: Mode,
    v_plus_balanced: np.ndarray,
) -> float:
    """min(-Re lambda) over the truncated spectrum, excluding at most the two
    eigenvalues of the critical block whose eigenvector overlap with the
    critical pair is >= 0.99."""
    bs = assemble_blocks(trunc, params, r1, eps)
    worst = np.inf
    yref = v_plus_balanced / np.linalg.norm(v_plus_balanced)
    for i, m in enumerate(trunc.full_modes):
        if eps is not None:
            s = balance_full(params, eps)
        else:
            s = balance_inc(m, params)
        mt = balanced(bs.full[i], s)
        if m.j == crit_mode.j and m.k == crit_mode.k:
            w, vr = np.linalg.eig(mt)
            vr = vr / np.linalg.norm(vr, axis=0)
            # the conjugate partner of the pair has eigenvector conj(yref)
            ov_plus = np.abs(np.conj(yref) @ vr)
            ov_minus = np.abs(yref @ vr)
            excluded = set()
            for ov in (ov_plus, ov_minus):
                idx = int(np.argmax(ov))
                if ov[idx] >= 0.99:
                    excluded.add(idx)
            keep = [x for x in range(len(w)) if x not in excluded]
            if keep:
                worst = min(worst, float(np.min(-w[keep].real)))
        else:
            w = np.linalg.eigvals(mt)
            worst = min(worst, float(np.min(-w.real)))
    if bs.acoustic.shape[0]:
        w = np.linalg.eigvals(bs.acoustic)
        worst = min(worst, float(np.min(-w.real)))
    if bs.scalar_diag.shape[0]:
        worst = min(worst, float(np.min(-bs.scalar_diag)))
    return worst


def find_inc_critical(params: Params, j_max: int, k_max: int) -> CriticalPoint:
    """Minimal oscillatory threshold over full modes, with eigenvectors,
    adjoints, transversality and the spectral gap at criticality."""
    params.require_hopf_admissible()
    trunc = Truncation(j_max, k_max, params.alpha)
    best = None
    degenerate = []
    stat_min = np.inf
    for m in trunc.full_modes:
        stat_min = min(stat_min, inc_stationary_threshold(params, m))
        thr = inc_oscillatory_threshold(params, m)
        if not thr.oscillatory:
            continue
        r1 = np.sqrt(thr.r1_sq)
        if best is None or r1 < best[0] - 1e-12 * max(1.0, best[0]):
            best = (r1, m, thr)
            degenerate = []
        elif abs(r1 - best[0]) <= 1e-12 * max(1.0, best[0]):
            degenerate.append(m)
            # deterministic tie-break: keep the smaller j (modes scanned in
            # lexicographic order, so `best` already has the smaller j)
    if best is None:
        raise AdmissibilityError("no oscillatory window: a^2 <= 0 at every full mode")
    r1c, mode_c, thr = best
    if r1c >= np.sqrt(stat_min):
        raise AdmissibilityError(
            f"steady onset preempts Hopf: oscillatory R1 = {r1c:.6g} vs "
            f"stationary {np.sqrt(stat_min):.6g}"
        )
    if not (1 <= mode_c.j < j_max and 1 <= mode_c.k < k_max):
        raise TruncationError(
            f"critical mode ({mode_c.j},{mode_c.k}) not strictly interior to the truncation"
        )

    a_freq = float(np.sqrt(thr.a_sq))
    block = assemble(mode_c, WHICH_INC, params, r1c).entries
    s = balance_inc(mode_c, params)
    nu = mode_c.basis_norms()[0]
    lam, v, vstar = weighted_eigenpair(
        block, s, nu, target=1j * a_freq, theta_idx=_THETA_IDX[REGIME_INC]
    )
    if lam.imag <= 0:
        raise ConvergenceFailure(f"crossing pair lost: leading eigenvalue {lam}")
    kblk = assemble(mode_c, WHICH_K_INC, params, r1c).entries
    w = model.inc_weight_vector(mode_c, params) * nu
    transv = complex(np.sum(w * (kblk @ v) * np.conj(vstar)))
    gap = _gap_excluding_pair(params, trunc, r1c, None, mode_c, s * v)

    tail = tail_abscissa_bound(params, r1c, mu_min_outside(trunc))
    if tail >= 0:
        raise TruncationError(
            f"truncation too small: discarded-mode abscissa bound {tail:.3g} >= 0"
        )
    return CriticalPoint(
        regime=REGIME_INC,
        params=params,
        r1c=float(r1c),
        a=float(lam.imag),
        mode_c=mode_c,
        u_plus=v,
        u_plus_star=vstar,
        transversality=transv,
        gap=gap,
        eps=None,
        metadata={
            "a_closed_form": a_freq,
            "degenerate_modes": [(m.j, m.k) for m in degenerate],
            "stationary_min_r1": float(np.sqrt(stat_min)),
            "tail_abscissa_bound": tail,
            "tail_below_gap": bool(tail <= -gap),
        },
    )


def _block_abscissa(block: np.ndarray, s: np.ndarray) -> float:
    return float(np.linalg.eigvals(balanced(block, s)).real.max())


def inc_crossing_by_eigensolver(
    params: Params, mode: Mode, tol: float = 1e-13, bracket_rel: float = 0.5
) -> float:
    """Locate the R1 at which the reduced block's spectral abscissa crosses
    zero, independently of the closed-form threshold."""
    params.require_hopf_admissible()
    s = balance_inc(mode, params)

    def g(r1: float) -> float:
        return _block_abscissa(assemble(mode, WHICH_INC, params, r1).entries, s)

    guess = np.sqrt(inc_oscillatory_threshold(params, mode).r1_sq)
    lo, hi = (1 - bracket_rel) * guess, (1 + bracket_rel) * guess
    glo, ghi = g(lo), g(hi)
    grow = 0
    while glo >= 0 and grow < 8:
        lo *= 0.5
        glo = g(lo)
        grow += 1
    while ghi <= 0 and grow < 16:
        hi *= 1.5
        ghi = g(hi)
        grow += 1
    if not (glo < 0 < ghi):
        raise ConvergenceFailure(f"no sign change in abscissa bracket [{lo}, {hi}]")
    return _bisect_secant(g, lo, hi, glo, ghi, tol)


def _bisect_secant(g, lo, hi, glo, ghi, tol, max_bisect=80, max_secant=12) -> float:
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if abs(gm) <= tol:
            return mid
        if gm < 0:
            lo, glo = mid, gm
        else:
            hi, ghi = mid, gm
        if hi - lo <= 1e-13 * max(1.0, abs(mid)):
            break
    x0, f0, x1, f1 = lo, glo, hi, ghi
    for _ in range(max_secant):
        if f1 == f0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if not (lo <= x2 <= hi):
            x2 = 0.5 * (lo + hi)
        f2 = g(x2)
        if abs(f2) <= tol:
            return x2
        x0, f0, x1, f1 = x1, f1, x2, f2
    return 0.5 * (lo + hi)


def find_ac_critical(
    params: Params,
    eps: float,
    j_max: int,
    k_max: int,
    tol: float = 1e-12,
    eps_max: float = 0.2,
    inc: CriticalPoint | None = None,
) -> CriticalPoint:
    """Root of the spectral abscissa of the compressible blocks in R1.

    The incompressible criticality supplies the bracket; the crossing pair and
    its weighted adjoint are recomputed from the full five-component block.
    """
    if not 0 < eps <= eps_max:
        raise AdmissibilityError(f"eps must be in (0, {eps_max}], got {eps}")
    if inc is None:
        inc = find_inc_critical(params, j_max, k_max)
    trunc = Truncation(j_max, k_max, params.alpha)
    mode_c = inc.mode_c
    s = balance_full(params, eps)

    def g(r1: float) -> float:
        return _block_abscissa(assemble(mode_c, WHICH_AC, params, r1, eps).entries, s)

    # bracket from the incompressible criticality +-10%, expanded if the
    # crossing drifted further (the offset grows like eps^2 but its
    # coefficient can be large)
    lo, hi = 0.9 * inc.r1c, 1.1 * inc.r1c
    glo, ghi = g(lo), g(hi)
    expansions = 0
    while glo >= 0 and expansions < 12:
        lo *= 0.9
        glo = g(lo)
        expansions += 1
    while ghi <= 0 and expansions < 24:
        hi *= 1.15
        ghi = g(hi)
        expansions += 1
    if not (glo < 0 < ghi):
        raise ConvergenceFailure(
            f"no sign change of the abscissa in bracket [{lo:.6g}, {hi:.6g}] at eps={eps}"
        )
    r1c = _bisect_secant(g, lo, hi, glo, ghi, tol)

    block = assemble(mode_c, WHICH_AC, params, r1c, eps).entries
    nu = mode_c.basis_norms()[0]
    lam, v, vstar = weighted_eigenpair(
        block, s, nu, target=1j * inc.a, theta_idx=_THETA_IDX[REGIME_AC]
    )
    # the pair must not have become real or swapped with the acoustic branch,
    # whose imaginary parts sit near sqrt(Pr mu)/eps
    acoustic_freq = np.sqrt(params.pr * mode_c.mu) / eps
    if lam.imag <= 0 or abs(lam.imag) >= 0.5 * acoustic_freq:
        raise ConvergenceFailure(
            f"crossing pair lost at eps={eps}: leading eigenvalue {lam}"
        )
    # the located root must be the global abscissa crossing, at the same mode
    bs = assemble_blocks(trunc, params, r1c, eps)
    absc, witness = spectral_abscissa_all(bs)
    if witness != (mode_c.j, mode_c.k):
        raise ConvergenceFailure(
            f"critical mode moved: abscissa witness {witness} != ({mode_c.j},{mode_c.k})"
        )
    if abs(absc) > 100 * max(tol, 1e-13):
        raise ConvergenceFailure(f"abscissa {absc:.3e} not resolved to tolerance at root")

    kblk = assemble(mode_c, WHICH_K, params, r1c, None).entries
    w = mode_c.component_weights(eps, params.pr) * nu
    transv = complex(np.sum(w * (kblk @ v) * np.conj(vstar)))
    gap = _gap_excluding_pair(params, trunc, r1c, eps, mode_c, s * v)
    tail = tail_abscissa_bound(params, r1c, mu_min_outside(trunc))
    return CriticalPoint(
        regime=REGIME_AC,
        params=params,
        r1c=float(r1c),
        a=float(lam.imag),
        mode_c=mode_c,
        u_plus=v,
        u_plus_star=vstar,
        transversality=transv,
        gap=gap,
        eps=eps,
        metadata={
            "inc_r1c": inc.r1c,
            "inc_a": inc.a,
            "abscissa_at_root": absc,
            "tail_abscissa_bound": tail,
            "tail_below_gap": bool(tail <= -gap),
        },
    )


# ---------------------------------------------------------------------------
# branch continuation and rate fitting
# ---------------------------------------------------------------------------


def eigenpair_branch(critical: CriticalPoint, eta_grid: np.ndarray) -> np.ndarray:
    """lambda_+(eta) along the grid by nearest-eigenvalue continuation.

    eta is the offset of R1 from the critical value.  The continuation walks
    outward from eta = 0 in both directions; a competitor eigenvalue closer
    than twice the continuation step is flagged as a branch collision.
    """
    eta_grid = np.asarray(eta_grid, dtype=float)
    if eta_grid.size == 0:
        raise AdmissibilityError("empty eta grid")
    params, mode_c = critical.params, critical.mode_c
    if critical.regime == REGIME_AC:
        s = balance_full(params, critical.eps)

        def block(r1):
            return assemble(mode_c, WHICH_AC, params, r1, critical.eps).entries
    else:
        s = balance_inc(mode_c, params)

        def block(r1):
            return assemble(mode_c, WHICH_INC, params, r1).entries

    out = np.zeros(eta_grid.size, dtype=complex)

    def walk(indices):
        lam_prev = 1j * critical.a
        for i in indices:
            w = np.linalg.eigvals(balanced(block(critical.r1c + eta_grid[i]), s))
            dist = np.abs(w - lam_prev)
            order = np.argsort(dist)
            if len(order) > 1 and dist[order[1]] < 2.0 * dist[order[0]] and dist[order[0]] > 0:
                raise ConvergenceFailure(
                    f"branch collision at eta={eta_grid[i]:.6g}: nearest eigenvalues "
                    f"{w[order[0]]:.6g} and {w[order[1]]:.6g}; refine the grid"
                )
            lam_prev = w[order[0]]
            out[i] = lam_prev

    order = np.argsort(eta_grid)
    nonneg = [i for i in order if eta_grid[i] >= 0]
    neg = [i for i in reversed(order) if eta_grid[i] < 0]
    walk(nonneg)
    walk(neg)
    return out


def transversality_fd(critical: CriticalPoint, h: float | None = None) -> complex:
    """Fourth-order centered finite difference of lambda_+ in eta, for
    cross-checking the projection formula."""
    if h is None:
        h = 1e-3 * max(1.0, critical.r1c / 50.0)
    lam = eigenpair_branch(critical, np.array([-2 * h, -h, h, 2 * h]))
    return complex((8.0 * (lam[2] - lam[1]) - (lam[3] - lam[0])) / (12.0 * h))


@dataclass
class RateFit:
    xs: np.ndarray
    errors: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    dropped: list
    monotone: bool


def fit_rate(xs, errors) -> RateFit:
    """Least-squares slope of log(error) against log(x)."""
    xs = np.asarray(xs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = errors > 0
    dropped = [int(i) for i in np.nonzero(~keep)[0]]
    if dropped:
        warnings.warn(f"dropping {len(dropped)} nonpositive error values", stacklevel=2)
    xs_k, err_k = xs[keep], errors[keep]
    if xs_k.size < 3:
        raise ConvergenceFailure(f"need >= 3 positive points for a rate fit, got {xs_k.size}")
    lx, le = np.log(xs_k), np.log(err_k)
    a = np.vstack([lx, np.ones_like(lx)]).T
    sol, *_ = np.linalg.lstsq(a, le, rcond=None)
    slope, intercept = float(sol[0]), float(sol[1])
    pred = a @ sol
    ss_res = float(np.sum((le - pred) ** 2))
    ss_tot = float(np.sum((le - np.mean(le)) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    order = np.argsort(xs_k)
    monotone = bool(np.all(np.diff(err_k[order]) >= 0))
    return RateFit(
        xs=xs_k, errors=err_k, slope=slope, intercept=intercept,
        r_squared=r2, dropped=dropped, monotone=monotone,
    )


def eigenprojection_matrix(critical: CriticalPoint) -> np.ndarray:
    """Rank-one projection u -> (u, u+*)_w u+ on the critical block as a 5x5
    matrix (INC data embedded; the INC pairing carries no pressure weight)."""
    up = critical.embedded_u_plus()
    us = critical.embedded_u_plus_star()
    m = critical.mode_c
    nu = m.basis_norms()[0]
    if critical.regime == REGIME_AC:
        w = m.component_weights(critical.eps, critical.params.pr) * nu
    else:
        w = m.component_weights(None, critical.params.pr) * nu  # zero weight on phi
    return np.outer(up, np.conj(w * us))


@dataclass
class ConvergenceStudy:
    eps_grid: np.ndarray
    inc: CriticalPoint
    ac: list
    err_r1c: np.ndarray
    err_a: np.ndarray
    err_u_plus: np.ndarray
    err_u_plus_star: np.ndarray
    err_projection: np.ndarray
    fits: dict
    projection_bound: float


def _vec_l2(diff: np.ndarray, nu: float) -> float:
    return float(np.sqrt(nu) * np.linalg.norm(diff))


def eps_convergence_study(
    params: Params,
    eps_grid,
    j_max: int,
    k_max: int,
    tol: float = 1e-12,
    inc: CriticalPoint | None = None,
) -> ConvergenceStudy:
    """Quadratic-rate study of the compressible criticality data against the
    incompressible limit."""
    eps_grid = np.asarray(eps_grid, dtype=float)
    if eps_grid.size == 0:
        raise AdmissibilityError("empty eps grid")
    if inc is None:
        inc = find_inc_critical(params, j_max, k_max)

    from ._parallel import map_ordered

    acs = map_ordered(
        lambda e: find_ac_critical(params, e, j_max, k_max, tol=tol, inc=inc), list(eps_grid)
    )
    nu = inc.mode_c.basis_norms()[0]
    up0 = inc.embedded_u_plus()
    us0 = inc.embedded_u_plus_star()
    p0 = eigenprojection_matrix(inc)

    err_r1c = np.array([abs(ac.r1c - inc.r1c) for ac in acs])
    err_a = np.array([abs(ac.a - inc.a) for ac in acs])
    err_up = np.array([_vec_l2(ac.embedded_u_plus() - up0, nu) for ac in acs])
    err_us = np.array([_vec_l2(ac.embedded_u_plus_star() - us0, nu) for ac in acs])
    err_proj = np.array(
        [np.linalg.norm(eigenprojection_matrix(ac) - p0, 2) for ac in acs]
    )
    proj_bound = max(np.linalg.norm(eigenprojection_matrix(ac), 2) for ac in acs)

    fits = {
        "r1c": fit_rate(eps_grid, err_r1c),
        "a": fit_rate(eps_grid, err_a),
        "u_plus": fit_rate(eps_grid, err_up),
        "u_plus_star": fit_rate(eps_grid, err_us),
        "projection": fit_rate(eps_grid, err_proj),
    }
    return ConvergenceStudy(
        eps_grid=eps_grid,
        inc=inc,
        ac=list(acs),
        err_r1c=err_r1c,
        err_a=err_a,
        err_u_plus=err_up,
        err_u_plus_star=err_us,
        err_projection=err_proj,
        fits=fits,
        projection_bound=float(proj_bound),
    )
