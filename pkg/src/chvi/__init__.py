"""chvi: viscous Cahn-Hilliard dynamics with inertia and a singular potential.

A spectral (Dirichlet sine eigenbasis) solver for the regularized system,
an energy-dissipative implicit time integrator with a per-step energy
ledger and a-priori estimate monitors, and a sweep harness that measures
convergence and time-concentration diagnostics as the regularization
parameter is driven to zero.
"""

__version__ = "0.1.0"

from .potential import (  # noqa: F401
    L1BoundResult,
    NonlinearTerm,
    PotentialKind,
    PotentialSpec,
    YosidaEval,
    resolvent,
    verify_l1_bound,
    yosida_curve,
)
from .spectral import (  # noqa: F401
    Grid,
    SpectralField,
    apply_power,
    inner_Vprime,
    norms,
    to_spectral,
    to_values,
)
from .dynamics import (  # noqa: F401
    ConstraintViolationError,
    EnergyLedger,
    EstimateReport,
    RunRecord,
    SimConfig,
    SimState,
    StepFailure,
    energy,
    monitor,
    regularize_initial_data,
    simulate,
    step,
)
from .sweep import (  # noqa: F401
    DEFAULT_EPS_LADDER,
    DualityVerdict,
    SweepPlan,
    SweepReport,
    duality_limsup_check,
    run_sweep,
)
from .config import ConfigError, RunSetup, parse_config  # noqa: F401
