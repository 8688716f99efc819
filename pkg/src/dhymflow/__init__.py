"""Rotationally symmetric dHYM slopes, stability and cotangent flow on Bl_pt P^n."""

from .aux_family import (BranchProfile, CriticalParams, FPolynomial, branch_family_monotone,
                         branch_profile, branch_solve, build_F, discriminant, find_xi,
                         find_xi_prime, ode_residual, p_star, xi_branch)
from .cohomology import (GeometryParams, SlopeData, StabilityReport, Verdict, check_identities,
                         classify, complex_power_pair, slope, slope_derivative,
                         unstability_thresholds)
from .errors import (CflViolation, DegenerateDenominator, DegenerateVolume, DHYMError, IllPosed,
                     InputError, NegativeDiscriminant, NoRootInBracket, NotConverged,
                     PhaseOutOfRange, SupercriticalViolation, UnsupportedDimension)
from .flow import (BackgroundMetric, FlowConfig, FlowDiagnostics, FlowMonitor, FlowState,
                   diagnostics, make_grid, phase, rhs, run, step)
from .initial_data import (InitialProfile, ResultantCubic, build_psi0, phase_monotonicity_check,
                           psi_family, resultant_certificate)

__version__ = "0.1.0"
