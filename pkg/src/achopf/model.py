"""Nondimensional parameters, Fourier-mode bookkeeping, per-mode operator
blocks, and the eps-weighted inner products and norms.

Component order is (phi, w1, w2, theta, psi) everywhere.  Degenerate modes
drop absent components instead of padding with zeros:

* full mode      (j>=1, k>=1): all five components
* acoustic mode  (j>=1, k=0):  (phi, w1)
* scalar mode    (j=0,  k>=1): (theta, psi)
* null mode      (j=0,  k=0):  empty

Basis functions on Omega = T_{2 pi/alpha} x (0, 1), with a = alpha*j and
b = k*pi:

    phi   ~ cos(a x1) cos(b x2)
    w1    ~ sin(a x1) cos(b x2)
    w2    ~ cos(a x1) sin(b x2)
    theta ~ cos(a x1) sin(b x2)
    psi   ~ cos(a x1) sin(b x2)

All assembly is exact rational-in-parameter floating arithmetic; no
quadrature enters anywhere in this module.  Norm conventions: for the fluid
triple bu = (w, theta, psi) the L2 norm carries the 1/Pr weight on the
velocity, ||bu||^2 = Pr^-1 ||w||^2 + ||theta||^2 + ||psi||^2, while norms of
bare components (||phi||, ||w||, ||theta||, ...) are plain L2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from .errors import AdmissibilityError, AssemblyError, TruncationError

COMPONENTS = ("phi", "w1", "w2", "theta", "psi")

KIND_FULL = "full"
KIND_ACOUSTIC = "acoustic"
KIND_SCALAR = "scalar"
KIND_NULL = "null"

# active component indices (into COMPONENTS) per mode kind
_ACTIVE = {
    KIND_FULL: (0, 1, 2, 3, 4),
    KIND_ACOUSTIC: (0, 1),
    KIND_SCALAR: (3, 4),
    KIND_NULL: (),
}

WHICH_AC = "AC"
WHICH_AC_ADJOINT = "AC_adjoint"
WHICH_INC = "INC"
WHICH_INC_ADJOINT = "INC_adjoint"
WHICH_K = "K"          # d/dR1 of the AC generator block
WHICH_K_INC = "K_INC"  # d/dR1 of the INC generator block


@dataclass(frozen=True)
class Params:
    """Nondimensional configuration: Prandtl, Lewis, salinity strength, wavenumber."""

    pr: float
    d: float
    r2: float
    alpha: float

    def __post_init__(self):
        if not self.pr > 0:
            raise AdmissibilityError(f"pr must be positive, got {self.pr}")
        if not self.d > 0:
            raise AdmissibilityError(f"d must be positive, got {self.d}")
        if self.r2 < 0:
            raise AdmissibilityError(f"r2 must be nonnegative, got {self.r2}")
        if not self.alpha > 0:
            raise AdmissibilityError(f"alpha must be positive, got {self.alpha}")

    @property
    def hopf_admissible(self) -> bool:
        """Oscillatory-onset structure requires pr > 1 and 0 < d < 1."""
        return self.pr > 1.0 and 0.0 < self.d < 1.0

    def require_hopf_admissible(self):
        if not self.hopf_admissible:
            raise AdmissibilityError(
                f"params not admissible for oscillatory onset: need pr > 1 and "
                f"0 < d < 1, got pr={self.pr}, d={self.d}"
            )


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional constants of the layer of depth ``ell`` heated/salted from below.

    ``alpha`` is the physical horizontal wavenumber (1/length); ``rho0`` does
    not enter the nondimensional groups but is kept for completeness.
    """

    nu: float
    d_t: float
    d_s: float
    a_t: float
    a_s: float
    g: float
    ell: float
    t0: float
    t1: float
    s0: float
    s1: float
    alpha: float
    rho0: float = 1.0

    def __post_init__(self):
        for name in ("nu", "d_t", "d_s", "a_t", "g", "ell", "alpha", "rho0"):
            if not getattr(self, name) > 0:
                raise AdmissibilityError(f"{name} must be positive, got {getattr(self, name)}")
        if self.a_s < 0:
            raise AdmissibilityError(f"a_s must be nonnegative, got {self.a_s}")
        if not self.t0 > self.t1:
            raise AdmissibilityError(
                f"temperature difference t0 - t1 must be positive, got {self.t0 - self.t1}"
            )
        if not self.s0 > self.s1:
            raise AdmissibilityError(
                f"salinity difference s0 - s1 must be positive, got {self.s0 - self.s1}"
            )


@dataclass(frozen=True)
class NondimensionalForm:
    params: Params
    r1: float


def nondimensionalize(p: PhysicalParams) -> NondimensionalForm:
    """Reduce dimensional constants to (Params, R1).

    R1^2 and R2^2 are the thermal/salinity Rayleigh numbers
    a_T g ell^3 (T0-T1)/(d_T nu) and a_S g ell^3 (S0-S1)/(d_T nu); the length
    scale maps the horizontal wavenumber to alpha*ell.
    """
    pr = p.nu / p.d_t
    d = p.d_s / p.d_t
    ell3 = p.ell**3
    r1_sq = p.a_t * p.g * ell3 * (p.t0 - p.t1) / (p.d_t * p.nu)
    r2_sq = p.a_s * p.g * ell3 * (p.s0 - p.s1) / (p.d_t * p.nu)
    params = Params(pr=pr, d=d, r2=float(np.sqrt(r2_sq)), alpha=p.alpha * p.ell)
    return NondimensionalForm(params=params, r1=float(np.sqrt(r1_sq)))


@dataclass(frozen=True)
class Mode:
    """Fourier mode (j, k) with horizontal symbol a = alpha*j, vertical b = k*pi."""

    j: int
    k: int
    alpha: float

    def __post_init__(self):
        if self.j < 0 or self.k < 0:
            raise AdmissibilityError(f"mode indices must be nonnegative, got ({self.j}, {self.k})")

    @property
    def a(self) -> float:
        return self.alpha * self.j

    @property
    def b(self) -> float:
        return np.pi * self.k

    @property
    def mu(self) -> float:
        return self.a**2 + self.b**2

    @property
    def kind(self) -> str:
        if self.j >= 1 and self.k >= 1:
            return KIND_FULL
        if self.j >= 1:
            return KIND_ACOUSTIC
        if self.k >= 1:
            return KIND_SCALAR
        return KIND_NULL

    @property
    def components(self) -> tuple[str, ...]:
        return tuple(COMPONENTS[i] for i in _ACTIVE[self.kind])

    @property
    def component_indices(self) -> tuple[int, ...]:
        return _ACTIVE[self.kind]

    @property
    def ncomp(self) -> int:
        return len(_ACTIVE[self.kind])

    @property
    def q(self) -> float:
        """Leray projection factor a^2/mu for full modes."""
        if self.kind != KIND_FULL:
            raise AssemblyError(f"q undefined for {self.kind} mode ({self.j},{self.k})")
        return self.a**2 / self.mu

    def basis_norms(self) -> np.ndarray:
        """Per active component: integral of the squared basis function over Omega.

        Full modes: pi/(2 alpha) for all five; any j=0 or k=0 component: pi/alpha.
        Stored per component, never assumed uniform off the full-mode case.
        """
        per = np.pi / self.alpha
        if self.kind == KIND_FULL:
            return np.full(5, per / 2.0)
        if self.kind in (KIND_ACOUSTIC, KIND_SCALAR):
            return np.full(2, per)
        return np.zeros(0)

    def weights_eps(self, eps: float) -> np.ndarray:
        """Component weights of the eps inner product: (eps^2, 1/Pr, 1/Pr, 1, 1)."""
        full = np.array([eps**2, np.nan, np.nan, 1.0, 1.0])
        # 1/Pr slot is parameter dependent; filled by Truncation.  Kept here for
        # single-mode use via explicit pr argument instead:
        raise NotImplementedError("use component_weights(eps, pr)")

    def component_weights(self, eps: float | None, pr: float) -> np.ndarray:
        full = [0.0 if eps is None else eps**2, 1.0 / pr, 1.0 / pr, 1.0, 1.0]
        return np.array([full[i] for i in _ACTIVE[self.kind]])


@dataclass(frozen=True)
class ModeMatrix:
    """Dense generator block for one Fourier mode.

    ``entries`` is the generator M of d/dt U = M U restricted to the mode's
    active components, i.e. the mode block of minus the evolution operator.
    ``which`` selects the variant; ``eps`` is present only for AC variants.
    """

    mode: Mode
    which: str
    entries: np.ndarray
    r1: float
    eps: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "j": self.mode.j,
            "k": self.mode.k,
            "alpha": self.mode.alpha,
            "which": self.which,
            "r1": self.r1,
            "eps": self.eps,
            "component_order": list(self.active_components()),
            "entries": [[[float(z.real), float(z.imag)] for z in row] for row in self.entries],
        }

    def active_components(self) -> tuple[str, ...]:
        if self.which in (WHICH_INC, WHICH_INC_ADJOINT, WHICH_K_INC):
            return ("w2", "theta", "psi")
        return self.mode.components

    @staticmethod
    def from_json_dict(d: dict) -> "ModeMatrix":
        mode = Mode(j=d["j"], k=d["k"], alpha=d["alpha"])
        entries = np.array(
            [[complex(re, im) for re, im in row] for row in d["entries"]], dtype=complex
        )
        return ModeMatrix(mode=mode, which=d["which"], entries=entries, r1=d["r1"], eps=d["eps"])

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @staticmethod
    def from_json(s: str) -> "ModeMatrix":
        return ModeMatrix.from_json_dict(json.loads(s))


def _ac_full(mode: Mode, params: Params, r1: float, eps: float) -> np.ndarray:
    a, b, mu = mode.a, mode.b, mode.mu
    pr, d, r2 = params.pr, params.d, params.r2
    e2 = eps * eps
    return np.array(
        [
            [0.0, -a / e2, -b / e2, 0.0, 0.0],
            [pr * a, -pr * mu, 0.0, 0.0, 0.0],
            [pr * b, 0.0, -pr * mu, pr * r1, -pr * r2],
            [0.0, 0.0, r1, -mu, 0.0],
            [0.0, 0.0, r2, 0.0, -d * mu],
        ],
        dtype=complex,
    )


def _ac_full_adjoint(mode: Mode, params: Params, r1: float, eps: float) -> np.ndarray:
    # adjoint generator in the eps-weighted inner product; equals W^-1 M^T W
    a, b, mu = mode.a, mode.b, mode.mu
    pr, d, r2 = params.pr, params.d, params.r2
    e2 = eps * eps
    return np.array(
        [
            [0.0, a / e2, b / e2, 0.0, 0.0],
            [-pr * a, -pr * mu, 0.0, 0.0, 0.0],
            [-pr * b, 0.0, -pr * mu, pr * r1, pr * r2],
            [0.0, 0.0, r1, -mu, 0.0],
            [0.0, 0.0, -r2, 0.0, -d * mu],
        ],
        dtype=complex,
    )


def _inc_full(mode: Mode, params: Params, r1: float) -> np.ndarray:
    mu, q = mode.mu, mode.q
    pr, d, r2 = params.pr, params.d, params.r2
    return np.array(
        [
            [-pr * mu, pr * q * r1, -pr * q * r2],
            [r1, -mu, 0.0],
            [r2, 0.0, -d * mu],
        ],
        dtype=complex,
    )


def _inc_full_adjoint(mode: Mode, params: Params, r1: float) -> np.ndarray:
    mu, q = mode.mu, mode.q
    pr, d, r2 = params.pr, params.d, params.r2
    return np.array(
        [
            [-pr * mu, pr * q * r1, pr * q * r2],
            [r1, -mu, 0.0],
            [-r2, 0.0, -d * mu],
        ],
        dtype=complex,
    )


def assemble(
    mode: Mode, which: str, params: Params, r1: float, eps: float | None = None
) -> ModeMatrix:
    """Assemble the requested generator block for one mode.

    AC variants act on the mode's active components; INC variants act on the
    reduced (w2, theta, psi) coordinates of the divergence-free subspace and
    are defined for full and scalar modes (scalar blocks carry no velocity and
    coincide with the AC scalar block).  K variants are the exact dR1
    derivatives of the corresponding generator.
    """
    kind = mode.kind
    if kind == KIND_NULL:
        raise AssemblyError("null mode (0,0) carries no components")
    ac_like = which in (WHICH_AC, WHICH_AC_ADJOINT)
    if ac_like and (eps is None or not eps > 0):
        raise AssemblyError(f"{which} block requires eps > 0, got {eps}")
    if not ac_like:
        eps = None

    if kind == KIND_SCALAR:
        if which in (WHICH_K, WHICH_K_INC):
            entries = np.zeros((2, 2), dtype=complex)
        else:
            entries = np.diag([-mode.mu, -params.d * mode.mu]).astype(complex)
        return ModeMatrix(mode=mode, which=which, entries=entries, r1=r1, eps=eps)

    if kind == KIND_ACOUSTIC:
        a = mode.a
        pr = params.pr
        if which == WHICH_AC:
            entries = np.array([[0.0, -a / eps**2], [pr * a, -pr * a * a]], dtype=complex)
        elif which == WHICH_AC_ADJOINT:
            entries = np.array([[0.0, a / eps**2], [-pr * a, -pr * a * a]], dtype=complex)
        elif which == WHICH_K:
            entries = np.zeros((2, 2), dtype=complex)
        else:
            raise AssemblyError(
                f"acoustic mode ({mode.j},0) has no divergence-free content; {which} undefined"
            )
        return ModeMatrix(mode=mode, which=which, entries=entries, r1=r1, eps=eps)

    # full mode
    if which == WHICH_AC:
        entries = _ac_full(mode, params, r1, eps)
    elif which == WHICH_AC_ADJOINT:
        entries = _ac_full_adjoint(mode, params, r1, eps)
    elif which == WHICH_INC:
        entries = _inc_full(mode, params, r1)
    elif which == WHICH_INC_ADJOINT:
        entries = _inc_full_adjoint(mode, params, r1)
    elif which == WHICH_K:
        entries = np.zeros((5, 5), dtype=complex)
        entries[2, 3] = params.pr
        entries[3, 2] = 1.0
    elif which == WHICH_K_INC:
        entries = np.zeros((3, 3), dtype=complex)
        entries[0, 1] = params.pr * mode.q
        entries[1, 0] = 1.0
    else:
        raise AssemblyError(f"unknown block variant {which!r}")
    return ModeMatrix(mode=mode, which=which, entries=entries, r1=r1, eps=eps)


def ac_weight_vector(mode: Mode, params: Params, eps: float) -> np.ndarray:
    """Diagonal of the eps inner product on the mode's active components."""
    return mode.component_weights(eps, params.pr)


def inc_weight_vector(mode: Mode, params: Params) -> np.ndarray:
    """Induced weight on (w2, theta, psi) after eliminating w1 = -(b/a) w2.

    Pr^-1 (|w1|^2 + |w2|^2) = Pr^-1 (1 + b^2/a^2) |w2|^2 = (Pr q)^-1 |w2|^2.
    """
    if mode.kind == KIND_SCALAR:
        return np.array([1.0, 1.0])
    if mode.kind != KIND_FULL:
        raise AssemblyError("reduced weight defined for full and scalar modes only")
    return np.array([1.0 / (params.pr * mode.q), 1.0, 1.0])


# ---------------------------------------------------------------------------
# truncation and field containers
# ---------------------------------------------------------------------------


class Truncation:
    """Mode set {0..j_max} x {0..k_max} minus the null mode, with a flat layout.

    Coefficients of a field are stored in one complex vector; per-slot metadata
    arrays (component index, basis norm, symbols a, b, mu) make the weighted
    norms plain vector reductions.  Mode order is lexicographic in (j, k), so
    every reduction over modes is deterministic.
    """

    def __init__(self, j_max: int, k_max: int, alpha: float):
        if j_max < 1 or k_max < 1:
            raise TruncationError(f"truncation must include full modes, got ({j_max},{k_max})")
        self.j_max = j_max
        self.k_max = k_max
        self.alpha = alpha
        modes = []
        for j in range(j_max + 1):
            for k in range(k_max + 1):
                m = Mode(j=j, k=k, alpha=alpha)
                if m.kind != KIND_NULL:
                    modes.append(m)
        self.modes: tuple[Mode, ...] = tuple(modes)

        offsets = []
        comp = []
        nu = []
        a = []
        b = []
        mu = []
        pos = 0
        self._index = {}
        for m in self.modes:
            offsets.append(pos)
            self._index[(m.j, m.k)] = len(offsets) - 1
            bn = m.basis_norms()
            for ci, c in enumerate(m.component_indices):
                comp.append(c)
                nu.append(bn[ci])
                a.append(m.a)
                b.append(m.b)
                mu.append(m.mu)
            pos += m.ncomp
        self.offsets = np.array(offsets, dtype=int)
        self.dim = pos
        self.comp = np.array(comp, dtype=int)
        self.nu = np.array(nu)
        self.sym_a = np.array(a)
        self.sym_b = np.array(b)
        self.sym_mu = np.array(mu)

        self.is_phi = self.comp == 0
        self.is_w1 = self.comp == 1
        self.is_w2 = self.comp == 2
        self.is_theta = self.comp == 3
        self.is_psi = self.comp == 4
        self.is_w = self.is_w1 | self.is_w2
        self.is_fluid = ~self.is_phi

        # gather index matrices per kind for batched linear algebra
        self.full_modes = [m for m in self.modes if m.kind == KIND_FULL]
        self.acoustic_modes = [m for m in self.modes if m.kind == KIND_ACOUSTIC]
        self.scalar_modes = [m for m in self.modes if m.kind == KIND_SCALAR]
        self.full_rows = self._gather([m for m in self.full_modes], 5)
        self.acoustic_rows = self._gather([m for m in self.acoustic_modes], 2)
        self.scalar_rows = self._gather([m for m in self.scalar_modes], 2)

    def _gather(self, modes: list[Mode], n: int) -> np.ndarray:
        rows = np.zeros((len(modes), n), dtype=int)
        for i, m in enumerate(modes):
            off = self.offsets[self.index(m.j, m.k)]
            rows[i] = np.arange(off, off + n)
        return rows

    def index(self, j: int, k: int) -> int:
        try:
            return self._index[(j, k)]
        except KeyError:
            raise TruncationError(f"mode ({j},{k}) outside truncation") from None

    def slice_of(self, j: int, k: int) -> slice:
        i = self.index(j, k)
        off = self.offsets[i]
        return slice(off, off + self.modes[i].ncomp)

    def weights_eps(self, eps: float, pr: float) -> np.ndarray:
        w = np.ones(self.dim)
        w[self.is_phi] = eps**2
        w[self.is_w] = 1.0 / pr
        return w

    def weights_fluid(self, pr: float) -> np.ndarray:
        w = np.ones(self.dim)
        w[self.is_phi] = 0.0
        w[self.is_w] = 1.0 / pr
        return w

    def balance_vector(self, eps: float, pr: float) -> np.ndarray:
        """sqrt of the eps weights; maps coefficients to the metric where the
        eps inner product is Euclidean (up to basis norms)."""
        return np.sqrt(self.weights_eps(eps, pr))

    def same_as(self, other: "Truncation") -> bool:
        return (
            self.j_max == other.j_max
            and self.k_max == other.k_max
            and self.alpha == other.alpha
        )


@dataclass
class ModeVector:
    """Coefficients of one mode together with its per-component basis norms."""

    mode: Mode
    coeffs: np.ndarray
    basis_norms: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "j": self.mode.j,
            "k": self.mode.k,
            "alpha": self.mode.alpha,
            "component_order": list(self.mode.components),
            "coeffs": [[float(z.real), float(z.imag)] for z in self.coeffs],
            "basis_norms": [float(v) for v in self.basis_norms],
        }

    @staticmethod
    def from_json_dict(d: dict) -> "ModeVector":
        mode = Mode(j=d["j"], k=d["k"], alpha=d["alpha"])
        coeffs = np.array([complex(re, im) for re, im in d["coeffs"]], dtype=complex)
        return ModeVector(mode=mode, coeffs=coeffs, basis_norms=np.array(d["basis_norms"]))


class Field:
    """A truncated field: one flat complex coefficient vector over a Truncation.

    Treated as immutable by convention; arithmetic returns new instances.
    """

    def __init__(self, trunc: Truncation, values: np.ndarray | None = None):
        self.trunc = trunc
        if values is None:
            values = np.zeros(trunc.dim, dtype=complex)
        values = np.asarray(values, dtype=complex)
        if values.shape != (trunc.dim,):
            raise TruncationError(
                f"field values have shape {values.shape}, expected ({trunc.dim},)"
            )
        self.values = values

    @staticmethod
    def zeros(trunc: Truncation) -> "Field":
        return Field(trunc)

    @staticmethod
    def random(trunc: Truncation, rng: np.random.Generator, complex_valued: bool = False) -> "Field":
        v = rng.standard_normal(trunc.dim)
        if complex_valued:
            v = v + 1j * rng.standard_normal(trunc.dim)
        return Field(trunc, v.astype(complex))

    def copy(self) -> "Field":
        return Field(self.trunc, self.values.copy())

    def mode_vector(self, j: int, k: int) -> ModeVector:
        i = self.trunc.index(j, k)
        m = self.trunc.modes[i]
        return ModeVector(mode=m, coeffs=self.values[self.trunc.slice_of(j, k)].copy(),
                          basis_norms=m.basis_norms())

    def with_mode(self, j: int, k: int, coeffs: np.ndarray) -> "Field":
        out = self.copy()
        out.values[self.trunc.slice_of(j, k)] = coeffs
        return out

    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.trunc, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.trunc, self.values - other.values)

    def __mul__(self, c: complex) -> "Field":
        return Field(self.trunc, self.values * c)

    __rmul__ = __mul__

    def _check(self, other: "Field"):
        if not self.trunc.same_as(other.trunc):
            raise TruncationError("mismatched truncations")

    def is_real(self, tol: float = 1e-12) -> bool:
        return float(np.max(np.abs(self.values.imag), initial=0.0)) <= tol

    def to_json(self) -> str:
        t = self.trunc
        return json.dumps(
            {
                "j_max": t.j_max,
                "k_max": t.k_max,
                "alpha": t.alpha,
                "component_order": list(COMPONENTS),
                "values": [[float(z.real), float(z.imag)] for z in self.values],
            }
        )

    @staticmethod
    def from_json(s: str) -> "Field":
        d = json.loads(s)
        trunc = Truncation(d["j_max"], d["k_max"], d["alpha"])
        vals = np.array([complex(re, im) for re, im in d["values"]], dtype=complex)
        return Field(trunc, vals)


# ---------------------------------------------------------------------------
# inner products and norms
# ---------------------------------------------------------------------------


def inner_product_eps(u: Field, v: Field, eps: float, pr: float) -> complex:
    """(u, v)_eps, conjugate linear in v, with weights (eps^2, 1/Pr, 1/Pr, 1, 1)."""
    u._check(v)
    t = u.trunc
    w = t.weights_eps(eps, pr) * t.nu
    return complex(np.sum(w * u.values * np.conj(v.values)))


def inner_product_fluid(u: Field, v: Field, pr: float) -> complex:
    """(bu, bv) = Pr^-1 (w, w') + (theta, theta') + (psi, psi'); ignores phi."""
    u._check(v)
    t = u.trunc
    w = t.weights_fluid(pr) * t.nu
    return complex(np.sum(w * u.values * np.conj(v.values)))


def norm_eps(u: Field, eps: float, pr: float) -> float:
    return float(np.sqrt(max(inner_product_eps(u, u, eps, pr).real, 0.0)))


def norm_eps_sq(u: Field, eps: float, pr: float) -> float:
    return float(inner_product_eps(u, u, eps, pr).real)


def norm_eps_x1_sq(u: Field, eps: float, pr: float) -> float:
    """|||u|||_{eps,X^1}^2 = |||u|||_eps^2 + eps^2 |||grad u|||_eps^2."""
    t = u.trunc
    w = t.weights_eps(eps, pr) * t.nu * (1.0 + eps**2 * t.sym_mu)
    return float(np.sum(w * np.abs(u.values) ** 2))


def norm_eps_x1(u: Field, eps: float, pr: float) -> float:
    return float(np.sqrt(max(norm_eps_x1_sq(u, eps, pr), 0.0)))


def norm_x1(u: Field, pr: float) -> float:
    """Gradient norm of the fluid part: sqrt(Pr^-1 ||grad w||^2 + ||grad theta||^2 + ||grad psi||^2)."""
    t = u.trunc
    w = t.weights_fluid(pr) * t.nu * t.sym_mu
    return float(np.sqrt(np.sum(w * np.abs(u.values) ** 2)))


def norm_dual(u: Field, pr: float) -> float:
    """Dual-space norm of the fluid part: per-mode weight mu^-1 on the X-weighted coefficients."""
    t = u.trunc
    w = t.weights_fluid(pr) * t.nu / t.sym_mu
    return float(np.sqrt(np.sum(w * np.abs(u.values) ** 2)))


def norm_fluid(u: Field, pr: float) -> float:
    t = u.trunc
    w = t.weights_fluid(pr) * t.nu
    return float(np.sqrt(np.sum(w * np.abs(u.values) ** 2)))


def component_norm_sq(u: Field, mask: np.ndarray) -> float:
    """Plain L2 norm squared of the masked components (no Pr weight)."""
    t = u.trunc
    return float(np.sum(t.nu[mask] * np.abs(u.values[mask]) ** 2))


def dissipation(u: Field, d: float) -> float:
    """D(bu) = ||grad w||^2 + ||grad theta||^2 + d ||grad psi||^2 (plain L2 weights)."""
    t = u.trunc
    w = np.zeros(t.dim)
    w[t.is_w] = 1.0
    w[t.is_theta] = 1.0
    w[t.is_psi] = d
    return float(np.sum(w * t.nu * t.sym_mu * np.abs(u.values) ** 2))


def norm_eps_X_sq(u: Field, eps: float, pr: float) -> float:
    """|||u|||_{eps,X}^2 = eps^2 ||phi||^2 + eps^4 ||grad phi||^2 + ||bu||^2."""
    t = u.trunc
    w = t.weights_fluid(pr).copy()
    w[t.is_phi] = eps**2 + eps**4 * t.sym_mu[t.is_phi]
    return float(np.sum(w * t.nu * np.abs(u.values) ** 2))


def norm_eps_X(u: Field, eps: float, pr: float) -> float:
    return float(np.sqrt(max(norm_eps_X_sq(u, eps, pr), 0.0)))


def div_w_coefficients(u: Field) -> np.ndarray:
    """Per-mode coefficient of div w in the (cos a x1)(cos b x2) basis.

    Full mode: a*w1 + b*w2; acoustic: a*w1; scalar: 0.
    """
    t = u.trunc
    out = np.zeros(len(t.modes), dtype=complex)
    for i, m in enumerate(t.modes):
        sl = slice(t.offsets[i], t.offsets[i] + m.ncomp)
        vals = u.values[sl]
        if m.kind == KIND_FULL:
            out[i] = m.a * vals[1] + m.b * vals[2]
        elif m.kind == KIND_ACOUSTIC:
            out[i] = m.a * vals[1]
    return out


def div_w_norm_sq(u: Field) -> float:
    t = u.trunc
    coeffs = div_w_coefficients(u)
    nu = np.array([m.basis_norms()[0] if m.kind != KIND_SCALAR else np.pi / t.alpha
                   for m in t.modes])
    return float(np.sum(nu * np.abs(coeffs) ** 2))


def coupling_phi_divw(u: Field, v: Field | None = None) -> complex:
    """(phi_u, div w_v)_{L2}; v defaults to u."""
    if v is None:
        v = u
    u._check(v)
    t = u.trunc
    total = 0.0 + 0.0j
    dv = div_w_coefficients(v)
    for i, m in enumerate(t.modes):
        if m.kind == KIND_SCALAR:
            continue
        off = t.offsets[i]
        phi = u.values[off]  # phi is the first active component
        total += m.basis_norms()[0] * phi * np.conj(dv[i])
    return complex(total)


@dataclass
class NormReport:
    """All weighted norms of one field, with a per-mode breakdown."""

    n_eps: float
    n_eps_x1: float
    n_x1: float
    n_dual: float
    dissipation: float
    per_mode: dict


def norms(u: Field, eps: float, params: Params) -> NormReport:
    t = u.trunc
    pr, d = params.pr, params.d
    per = {}
    for i, m in enumerate(t.modes):
        sl = slice(t.offsets[i], t.offsets[i] + m.ncomp)
        vals = np.abs(u.values[sl]) ** 2
        nu = m.basis_norms()
        weps = m.component_weights(eps, pr)
        n_eps_sq = float(np.sum(weps * nu * vals))
        per[(m.j, m.k)] = {
            "n_eps_sq": n_eps_sq,
            "n_eps_x1_sq": float((1.0 + eps**2 * m.mu) * n_eps_sq),
            "mu": m.mu,
        }
    return NormReport(
        n_eps=norm_eps(u, eps, pr),
        n_eps_x1=norm_eps_x1(u, eps, pr),
        n_x1=norm_x1(u, pr),
        n_dual=norm_dual(u, pr),
        dissipation=dissipation(u, d),
        per_mode=per,
    )


# ---------------------------------------------------------------------------
# batched assembly over a truncation (values-only hot paths)
# ---------------------------------------------------------------------------


@dataclass
class BlockSet:
    """Stacked generator blocks over a truncation, grouped by mode kind.

    ``full`` has shape (Nf, 5, 5); ``acoustic`` (Na, 2, 2); scalar blocks are
    diagonal and stored as (Ns, 2) eigenvalue rows (-mu, -d mu).
    """

    trunc: Truncation
    params: Params
    r1: float
    eps: float | None
    full: np.ndarray
    acoustic: np.ndarray
    scalar_diag: np.ndarray

    def block_for(self, j: int, k: int) -> np.ndarray:
        t = self.trunc
        m = t.modes[t.index(j, k)]
        if m.kind == KIND_FULL:
            i = [x for x, fm in enumerate(t.full_modes) if fm.j == j and fm.k == k][0]
            return self.full[i]
        if m.kind == KIND_ACOUSTIC:
            i = [x for x, am in enumerate(t.acoustic_modes) if am.j == j][0]
            return self.acoustic[i]
        i = [x for x, sm in enumerate(t.scalar_modes) if sm.k == k][0]
        return np.diag(self.scalar_diag[i]).astype(complex)


def assemble_blocks(trunc: Truncation, params: Params, r1: float, eps: float | None) -> BlockSet:
    """Assemble all AC blocks (eps > 0) or all INC-embedded blocks (eps None).

    With eps None the full-mode blocks are the 3x3 reduced ones padded into the
    leading 3x3 of a (Nf,3,3) array and acoustic blocks are empty; callers that
    need the incompressible spectrum use this variant.
    """
    pr, d = params.pr, params.d
    if eps is not None:
        nf = len(trunc.full_modes)
        full = np.zeros((nf, 5, 5), dtype=complex)
        for i, m in enumerate(trunc.full_modes):
            full[i] = _ac_full(m, params, r1, eps)
        na = len(trunc.acoustic_modes)
        ac = np.zeros((na, 2, 2), dtype=complex)
        for i, m in enumerate(trunc.acoustic_modes):
            a = m.a
            ac[i] = np.array([[0.0, -a / eps**2], [pr * a, -pr * a * a]])
    else:
        nf = len(trunc.full_modes)
        full = np.zeros((nf, 3, 3), dtype=complex)
        for i, m in enumerate(trunc.full_modes):
            full[i] = _inc_full(m, params, r1)
        ac = np.zeros((0, 2, 2), dtype=complex)
    ns = len(trunc.scalar_modes)
    sc = np.zeros((ns, 2))
    for i, m in enumerate(trunc.scalar_modes):
        sc[i] = (-m.mu, -d * m.mu)
    return BlockSet(trunc=trunc, params=params, r1=r1, eps=eps, full=full,
                    acoustic=ac, scalar_diag=sc)


def balance_full(params: Params, eps: float | None) -> np.ndarray:
    """Similarity scaling that maps full-mode blocks to the metric where the
    weighted inner product is Euclidean: diag(eps, Pr^-1/2, Pr^-1/2, 1, 1)."""
    pr = params.pr
    if eps is None:
        raise AssemblyError("balance_full needs eps for AC blocks")
    return np.array([eps, pr**-0.5, pr**-0.5, 1.0, 1.0])


def balance_inc(mode: Mode, params: Params) -> np.ndarray:
    """Reduced-metric scaling diag((Pr q)^-1/2, 1, 1) for the 3x3 blocks."""
    return np.array([1.0 / np.sqrt(params.pr * mode.q), 1.0, 1.0])


def balanced(block: np.ndarray, s: np.ndarray) -> np.ndarray:
    """S M S^-1 for diagonal S given as a vector."""
    return block * (s[:, None] / s[None, :])


def spectral_abscissa_all(bs: BlockSet) -> tuple[float, tuple[int, int]]:
    """Max real part over all eigenvalues of all blocks, with the witness mode."""
    t = bs.trunc
    best = -np.inf
    witness = None
    if bs.full.shape[0] > 0:
        if bs.eps is not None:
            s = balance_full(bs.params, bs.eps)
            blocks = bs.full * (s[None, :, None] / s[None, None, :])
        else:
            blocks = np.array([
                balanced(bs.full[i], balance_inc(m, bs.params))
                for i, m in enumerate(t.full_modes)
            ])
        ev = np.linalg.eigvals(blocks)
        re = ev.real.max(axis=1)
        i = int(np.argmax(re))
        if re[i] > best:
            best = float(re[i])
            witness = (t.full_modes[i].j, t.full_modes[i].k)
    if bs.acoustic.shape[0] > 0:
        ev = np.linalg.eigvals(bs.acoustic)
        re = ev.real.max(axis=1)
        i = int(np.argmax(re))
        if re[i] > best:
            best = float(re[i])
            witness = (t.acoustic_modes[i].j, 0)
    if bs.scalar_diag.shape[0] > 0:
        re = bs.scalar_diag.max(axis=1)
        i = int(np.argmax(re))
        if re[i] > best:
            best = float(re[i])
            witness = (0, t.scalar_modes[i].k)
    return best, witness


def tail_abscissa_bound(params: Params, r1: float, mu_min_discarded: float) -> float:
    """Upper bound on Re(lambda) for any mode with mu >= mu_min_discarded.

    In the weighted metric the pressure and salinity couplings are
    skew-adjoint; only the thermal coupling shifts real parts, bounded per
    component by max(Pr (R1 - mu), R1 - mu, -d mu).  Decreasing in mu, so the
    value at the smallest discarded mu bounds the whole tail.
    """
    mu = mu_min_discarded
    return max(params.pr * (r1 - mu), r1 - mu, -params.d * mu)


def mu_min_outside(trunc: Truncation) -> float:
    """Smallest Laplacian symbol among modes discarded by the truncation."""
    alpha = trunc.alpha
    cands = [
        (alpha * (trunc.j_max + 1)) ** 2,  # acoustic row j_max+1
        (np.pi * (trunc.k_max + 1)) ** 2,  # scalar column k_max+1
        (alpha * (trunc.j_max + 1)) ** 2 + np.pi**2,
        alpha**2 + (np.pi * (trunc.k_max + 1)) ** 2,
    ]
    return float(min(cands))


# reconstruction on a physical grid (used by the quadrature cross-checks)

_SIN_X1 = {1}  # component indices whose x1 factor is sin
_SIN_X2 = {2, 3, 4}  # component indices whose x2 factor is sin


def field_values_on_grid(u: Field, component: int, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Evaluate one component of the reconstructed field on a tensor grid."""
    t = u.trunc
    out = np.zeros((len(x1), len(x2)))
    for i, m in enumerate(t.modes):
        if component not in m.component_indices:
            continue
        ci = m.component_indices.index(component)
        c = u.values[t.offsets[i] + ci]
        f1 = np.sin(m.a * x1) if component in _SIN_X1 else np.cos(m.a * x1)
        f2 = np.sin(m.b * x2) if component in _SIN_X2 else np.cos(m.b * x2)
        out += np.real(c) * np.outer(f1, f2)
    return out


def field_gradient_on_grid(
    u: Field, component: int, x1: np.ndarray, x2: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic (d/dx1, d/dx2) of one reconstructed component on a tensor grid."""
    t = u.trunc
    d1 = np.zeros((len(x1), len(x2)))
    d2 = np.zeros((len(x1), len(x2)))
    for i, m in enumerate(t.modes):
        if component not in m.component_indices:
            continue
        ci = m.component_indices.index(component)
        c = np.real(u.values[t.offsets[i] + ci])
        sin1 = component in _SIN_X1
        sin2 = component in _SIN_X2
        f1 = np.sin(m.a * x1) if sin1 else np.cos(m.a * x1)
        f2 = np.sin(m.b * x2) if sin2 else np.cos(m.b * x2)
        g1 = m.a * (np.cos(m.a * x1) if sin1 else -np.sin(m.a * x1))
        g2 = m.b * (np.cos(m.b * x2) if sin2 else -np.sin(m.b * x2))
        d1 += c * np.outer(g1, f2)
        d2 += c * np.outer(f1, g2)
    return d1, d2
