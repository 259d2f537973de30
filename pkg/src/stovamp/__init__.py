"""Vector approximate message passing for phase retrieval from several magnitude measurements."""

from .core import (
    PREC_MAX,
    PREC_MIN,
    CapabilityError,
    ConfigError,
    DimensionError,
    GaussianMessage,
    NumericalError,
    RngHandle,
    StovampError,
    damped_update,
    ep_extrinsic,
    gaussian_product,
    sample_standard_complex_gaussian,
)
from .denoisers import GaussianPrior, RicianChannel, bessel_ratio, prior_denoise, rician_denoise
from .metrics import TraceRecord, generate_observation, nmse, snr_to_noise_precision
from .sensing import (
    CodedDiffractionOperator,
    DenseOperator,
    HaarOperator,
    SensingOperator,
    StackedOperator,
    sample_cdp_operators,
    sample_haar_columns,
)
from .solver import SolverConfig, SolverState, initialize_state, lmmse_update, stochastic_vamp_run, vamp_run

__version__ = "0.1.0"
