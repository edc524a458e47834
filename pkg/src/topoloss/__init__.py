"""Cubical persistence, entropic diagram transport, and topology-aware loss.

The package turns 3D scalar volumes into sublevel persistence diagrams,
measures diagram dissimilarity with an entropically regularized transport
solver, and combines a focal segmentation loss with that topological
distance. Every approximate component has an exact brute-force companion
(Betti oracle, Hungarian assignment) for validation.
"""

__version__ = "0.1.0"

from .cubical import (
    ComplexTooLargeError,
    DiagramFormatError,
    PersistenceDiagram,
    PersistencePair,
    betti_oracle,
    read_diagram,
    sublevel_persistence,
    write_diagram,
)
from .loss import (
    FocalConfig,
    FocalGradient,
    LossReport,
    TaflConfig,
    TopoTerm,
    focal_loss,
    focal_loss_grad,
    tafl_loss,
    topological_loss,
)
from .transport import (
    EmptyDiagramError,
    NonFiniteCoordinateError,
    SinkhornConfig,
    TransportPlan,
    augment_diagonal,
    cost_matrix,
    exact_assignment,
    sinkhorn_plan,
    transport_plan,
    wasserstein_distance,
)
from .volume import (
    BadMagicError,
    DimsError,
    LabelMask,
    LabelRangeError,
    NonFiniteValueError,
    PhantomError,
    ProbabilityField,
    TruncatedPayloadError,
    UnknownDtypeError,
    Volume3D,
    VolumeFormatError,
    field_from_mask,
    field_from_probs,
    generate_phantom,
    load_labels,
    load_volume,
    one_hot,
    save_labels,
    save_volume,
)

__all__ = [
    "__version__",
    "Volume3D", "LabelMask", "ProbabilityField",
    "load_volume", "save_volume", "load_labels", "save_labels",
    "generate_phantom", "field_from_mask", "field_from_probs", "one_hot",
    "VolumeFormatError", "BadMagicError", "TruncatedPayloadError", "DimsError",
    "NonFiniteValueError", "UnknownDtypeError", "LabelRangeError", "PhantomError",
    "PersistencePair", "PersistenceDiagram", "sublevel_persistence", "betti_oracle",
    "read_diagram", "write_diagram", "DiagramFormatError", "ComplexTooLargeError",
    "SinkhornConfig", "TransportPlan", "cost_matrix", "sinkhorn_plan",
    "wasserstein_distance", "transport_plan", "exact_assignment", "augment_diagonal",
    "EmptyDiagramError", "NonFiniteCoordinateError",
    "FocalConfig", "TaflConfig", "LossReport", "TopoTerm", "FocalGradient",
    "focal_loss", "focal_loss_grad", "topological_loss", "tafl_loss",
]
