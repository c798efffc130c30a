"""Three-mode continuous-variable erasure code in the characteristic-function picture."""

__version__ = "0.1.0"

from .fidelity import (
    EnsembleSpec,
    PatternFidelities,
    direct_transmission_fidelity,
    fidelity_coherent,
    mean_fidelity,
    mean_fidelity_oracle,
    pattern_fidelities,
    postselect_fidelity,
    total_fidelity,
    vacuum_mean_fidelity,
)
from .optimizer import (
    GainDictionary,
    ProtocolResult,
    build_gain_dictionary,
    optimize_gains,
    optimize_resource,
    protocol_sweep,
)
from .pipeline import (
    PATTERNS,
    ErasurePattern,
    Gains,
    check_equivalence,
    output_cf_pipeline,
    output_cf_table1,
)
from .quadrature import QuadratureSpec
from .states import DomainError, ResourceKind, ResourceSpec

__all__ = [
    "DomainError",
    "EnsembleSpec",
    "ErasurePattern",
    "GainDictionary",
    "Gains",
    "PATTERNS",
    "PatternFidelities",
    "ProtocolResult",
    "QuadratureSpec",
    "ResourceKind",
    "ResourceSpec",
    "build_gain_dictionary",
    "check_equivalence",
    "direct_transmission_fidelity",
    "fidelity_coherent",
    "mean_fidelity",
    "mean_fidelity_oracle",
    "optimize_gains",
    "optimize_resource",
    "output_cf_pipeline",
    "output_cf_table1",
    "pattern_fidelities",
    "postselect_fidelity",
    "protocol_sweep",
    "total_fidelity",
    "vacuum_mean_fidelity",
]
