"""Multifractal spectra of weighted Birkhoff averages on shift spaces."""

from .errors import (
    BirkhoffError,
    BucketRangeOverflow,
    CapExceeded,
    DegeneratePotential,
    DimensionMismatch,
    LimitTooLarge,
    MaxIterations,
    NotPrimitive,
    OutsideDomain,
    PrefixTooShort,
    SymbolExhausted,
)
from .oracle import (
    CountResult,
    DpConfig,
    degenerate_weight_example,
    empirical_spectrum_check,
    level_set_count,
    product_entropy_check,
    two_scale_count,
)
from .pressure import (
    MinimizeOptions,
    MinimizeResult,
    PotentialTable,
    PressureEstimate,
    PressureEval,
    Status,
    domain_interval,
    log_zn,
    minimize_pressure,
    pressure_estimate,
    pressure_iid,
)
from .spectrum import (
    BernoulliJoint,
    SpectrumPoint,
    duality_gap,
    equilibrium_measure,
    moebius_digit_spectrum,
    moebius_weight_model,
    spectrum_at,
    spectrum_curve,
)
from .symbolic import (
    SftSpec,
    Word,
    count_admissible,
    cylinder_metric,
    enumerate_admissible,
    is_primitive,
    sft_entropy,
)
from .weights import (
    BernoulliStream,
    ExplicitStream,
    FrequencyVector,
    MarkovStream,
    MoebiusStream,
    PeriodicStream,
    WeightStream,
    empirical_frequency,
    moebius_sieve,
    stream_from_descriptor,
    target_frequency,
    transport_apply,
    transport_gamma,
    transport_mn,
)

__version__ = "0.1.0"
