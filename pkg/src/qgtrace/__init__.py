"""Trace formulae and spectral tools for quantum graphs with delta / delta-prime couplings."""

from __future__ import annotations

from .errors import (
    ContinuityError,
    InvalidCouplingError,
    InvalidGraphError,
    LimitPointError,
    LoopPresentError,
    NoMatchError,
    NonInvertibleCouplingError,
    NotOrderedError,
    NumericalError,
    PoleProximityError,
    QGraphError,
    SingularEdgeError,
    WindowError,
)
from .graph_core import (
    Edge,
    LengthValue,
    MetricGraph,
    cycle_basis,
    incidence_sets,
    is_simple_minimal_delta,
    minimal_operator_eigenvalue_free_delta_prime,
    rationally_dependent,
    validate_graph,
    vertex_valences,
)
from .mfunction import (
    SpectralPoint,
    boundary_maps,
    eval_m,
    eval_m_delta,
    eval_m_delta_prime,
    kernel_element,
    m_limit_zero,
    validate_weyl_identity,
)
from .secular import (
    CouplingSet,
    Spectrum,
    edge_matching_matrix,
    entire_secular,
    fem_spectrum_delta,
    find_spectrum,
    multiplicity_at,
)

__version__ = "0.1.0"
