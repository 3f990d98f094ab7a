"""Boundary stabilization of 2-D linear hyperbolic relaxation systems."""

from .boundary import (
    BoundaryFace,
    CharacteristicState,
    ControlLaw,
    EdgeTrace,
    Segment,
    apply_control_laws,
    boundary_term,
    characteristic_gain,
    edge_faces,
    face_eigenstructure,
    reconstruct,
    split_state,
    zero_incoming_laws,
)
from .estimators import (
    CharacteristicSplitter,
    DecayRateEstimator,
    RelaxationSimulator,
    StabilityCertifier,
)
from .saint_venant import (
    GateGains,
    SaintVenantParams,
    analytic_bc,
    audit_inequalities,
    build_controls,
    build_model,
    feasible_gains,
    steady_slopes,
)
from .solver import GridState, SchemeConfig, fit_decay, flux_split, run, step
from .stability import (
    LyapunovWeight,
    RawSystem,
    RectDomain,
    RelaxationSystem,
    StabilityCertificate,
    build_weight,
    certify,
    compute_coupling_constant,
    decay_rate,
    find_advection_direction,
    normalize_system,
    verify_dissipativity,
    verify_symmetrizer,
)

__version__ = "0.1.0"
