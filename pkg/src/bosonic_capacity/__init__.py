"""Classical-capacity bounds and truncated Fock-space simulation of bosonic
attenuators and classical-noise channels."""

__version__ = "0.1.0"

from .bounds import (
    EPI,
    EPNI,
    BoundReport,
    bound_curve,
    channel_bounds,
    gaussian_attenuator_capacity,
    gaussian_noise_capacity,
    shannon_additive_bounds,
)
from .channels import (
    AttenuatorSpec,
    ClassicalNoiseSpec,
    EnvironmentSpec,
    NoiseDensity,
    apply_attenuator,
    apply_channel,
    apply_classical_noise,
    holevo_coherent_rate,
    output_moments,
)
from .errors import (
    BosonicCapacityError,
    CoverageError,
    DomainError,
    InconsistentSpecError,
    InvalidStateError,
    ModeCountError,
    NumericalError,
    TruncationError,
)
from .fockcore import DensityMatrix, von_neumann_entropy
from .gauss import GaussianMoments, extract_moments, g_function, g_inverse, gaussified_entropy
from .verify import InequalityMargin, SuiteConfig, run_suite
