"""Spectral toolkit for the artificially compressible doubly diffusive
convection layer: per-mode operator blocks, Hopf criticality, singular-limit
convergence rates, uniform spectral gaps, semigroup decay, and time-periodic
solvability."""

from .errors import (
    AchopfError,
    AdmissibilityError,
    AssemblyError,
    ConfigError,
    ConvergenceFailure,
    SolvabilityError,
    TruncationError,
)
from .model import (
    Field,
    Mode,
    ModeMatrix,
    ModeVector,
    Params,
    PhysicalParams,
    Truncation,
    assemble,
    inner_product_eps,
    nondimensionalize,
    norms,
)
from .criticality import (
    CriticalPoint,
    RateFit,
    eigenpair_branch,
    eps_convergence_study,
    find_ac_critical,
    find_inc_critical,
    fit_rate,
    inc_oscillatory_threshold,
    inc_stationary_threshold,
)
from .smalleig import Spectrum, char_poly_roots, eig_dense
from .spectral_survey import (
    GapReport,
    ResolventProbe,
    poincare_constant,
    resolvent_probe_highfreq,
    resolvent_probe_lowfreq,
    spectral_gap,
)
from .dynamics import (
    EnergyConfig,
    Trajectory,
    decay_fit,
    energy_functionals,
    project_Q,
    propagate_mode,
    solve_ivp,
    verify_energy_inequalities,
)
from .periodic import (
    PeriodicField,
    ProjectionReport,
    fixed_point_solve,
    monodromy_resolvent_probe,
    projections,
    resolvent_Beps,
    solve_Beps,
    solve_Beps_omega,
)
from .stokes import StokesSolution, solve_stokes_mode

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
