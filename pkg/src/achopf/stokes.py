"""Auxiliary Stokes system per Fourier mode: div v = f, -Lap v + grad p = g
with the slip-type wall conditions, and its two a-priori estimate ratios.

Per full mode the system reduces to the 3x3 linear relations

    a v1 + b v2         = f
    mu v1        - a p  = g1
    mu v2        - b p  = g2

whose determinant is mu^2 > 0.  The H^-1 norm of the datum carries the
per-mode weight mu^(-1/2), the Fourier realization of the dual norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssemblyError
from .model import KIND_FULL, Mode


@dataclass
class StokesSolution:
    mode: Mode
    p_hat: complex
    v1_hat: complex
    v2_hat: complex
    residual: float
    estimate_ratios: dict


def solve_stokes_mode(mode: Mode, f_hat: complex, g_hat: tuple[complex, complex]) -> StokesSolution:
    """Solve the mode block and report the estimate ratios

    r1 = (||p|| + ||grad v||) / (||f|| + ||g||_{H^-1})
    r2 = (||grad p|| + ||grad^2 v||) / (||f||_{H^1} + ||g||).
    """
    if mode.kind != KIND_FULL:
        raise AssemblyError(f"Stokes block needs a full mode, got {mode.kind}")
    a, b, mu = mode.a, mode.b, mode.mu
    g1, g2 = g_hat
    mat = np.array([[a, b, 0.0], [mu, 0.0, -a], [0.0, mu, -b]], dtype=complex)
    rhs = np.array([f_hat, g1, g2], dtype=complex)
    v1, v2, p = np.linalg.solve(mat, rhs)

    scale = max(np.max(np.abs(rhs)), 1.0) * max(mu, 1.0)
    residual = float(np.max(np.abs(mat @ np.array([v1, v2, p]) - rhs))) / scale

    nu = mode.basis_norms()[0]
    s = np.sqrt(nu)
    v_amp = np.sqrt(abs(v1) ** 2 + abs(v2) ** 2)
    g_amp = np.sqrt(abs(g1) ** 2 + abs(g2) ** 2)
    p_l2 = s * abs(p)
    grad_v = s * np.sqrt(mu) * v_amp
    grad_p = s * np.sqrt(mu) * abs(p)
    grad2_v = s * mu * v_amp
    f_l2 = s * abs(f_hat)
    f_h1 = s * np.sqrt(1.0 + mu) * abs(f_hat)
    g_hm1 = s * g_amp / np.sqrt(mu)
    g_l2 = s * g_amp

    def ratio(num, den):
        return float(num / den) if den > 0 else 0.0

    ratios = {
        "r1": ratio(p_l2 + grad_v, f_l2 + g_hm1),
        "r2": ratio(grad_p + grad2_v, f_h1 + g_l2),
    }
    return StokesSolution(mode=mode, p_hat=complex(p), v1_hat=complex(v1),
                          v2_hat=complex(v2), residual=residual, estimate_ratios=ratios)


def stokes_sweep(alpha: float, j_max: int, k_max: int, seed: int = 2024) -> dict:
    """Random-data sweep over modes j, k <= bounds; returns the worst residual
    and the ratio tables."""
    rng = np.random.default_rng(seed)
    worst_res = 0.0
    r1s, r2s, modes = [], [], []
    for j in range(1, j_max + 1):
        for k in range(1, k_max + 1):
            m = Mode(j, k, alpha)
            f = complex(rng.standard_normal(), rng.standard_normal())
            g = (complex(rng.standard_normal(), rng.standard_normal()),
                 complex(rng.standard_normal(), rng.standard_normal()))
            sol = solve_stokes_mode(m, f, g)
            worst_res = max(worst_res, sol.residual)
            r1s.append(sol.estimate_ratios["r1"])
            r2s.append(sol.estimate_ratios["r2"])
            modes.append((j, k))
    return {
        "worst_residual": worst_res,
        "r1": np.array(r1s),
        "r2": np.array(r2s),
        "modes": modes,
    }
