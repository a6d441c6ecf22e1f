"""Uncertainty quantities for Lipschitz maps on finite-dimensional Banach
spaces, and numerical verification of the inequality chains they satisfy."""
from .errors import (
    DimensionMismatch,
    DomainEscape,
    EmptySample,
    NonUnitState,
    NotHermitian,
    NotNormalizable,
    UnsupportedExponent,
)
from .lipnorm import (
    LipEstimate,
    lip_exact_linear_map,
    lip_linear_composite_exact,
    lip_refine,
    lip_sampled,
)
from .model import (
    ComponentwiseMap,
    DomainSpec,
    GeneratorConfig,
    Instance,
    LinearFunctional,
    LinearMap,
    Mode,
    PinnedPolynomial,
    PostComposedFunctional,
    RadialMap,
    ScaledTanh,
    eval_functional,
    eval_map,
    generate_instance,
    normalize_functional,
)
from .space import INF, NormSpec, dual_exponent, dual_norm, inner, norm
from .uncertainty import (
    ChainReport,
    anticommutator_apply,
    chain_nhrs,
    commutator_apply,
    corollary_anticommutator,
    corollary_commutator,
    delta,
    delta_hilbert,
    hilbert_reduction_check,
    middle_form,
    nabla,
    robertson_chain,
    schrodinger_bound,
)

__version__ = "0.1.0"
