"""Random walks in random environments on marked trees.

Simulation of mark-driven walks on random marked trees and rayed trees,
regime classification from the mark law, electrical-network and cascade
computations, the excursion coupling, and Monte Carlo harnesses that verify
the structural identities and central limit behaviour at desk scale.
"""

from .cascade import (
    CascadeSeries,
    HarmonicFrame,
    cascade,
    estimate_eta,
    estimate_sigma2,
    harmonic_frame,
    martingale_series,
    w_estimate,
)
from .coupling import (
    CoupledPair,
    ExcursionDecomposition,
    build_coupled,
    couple_to_horizon,
    decompose,
    discrepancies,
)
from .experiments import (
    ExperimentReport,
    annealed_clt,
    canonical_laws,
    check_change_of_law,
    check_many_to_one,
    check_stationarity,
    ks_statistic,
    quenched_clt,
    verify_suite,
)
from .laws import (
    Atom,
    FiniteSupportLaw,
    MarkDistSpec,
    MarkLaw,
    OffspringSpec,
    ParametricLaw,
    SizeBiasedLaw,
    law_from_config,
    load_law,
    size_bias,
)
from .network import (
    conductance_oracle,
    effective_conductance,
    invariant_measure,
    max_flow,
    max_flow_oracle,
)
from .regime import Classification, RegimeReport, classify, infimum_rho, kappa, rho, rho_prime
from .trees import (
    MarkedTree,
    RayedTree,
    ShiftView,
    dump_jsonl,
    expand_frontier,
    generate_imt,
    generate_mt,
    shift,
)
from .walk import Trajectory, Walker, environment_seen_from_particle, kernel, run_walk

__version__ = "0.1.0"
