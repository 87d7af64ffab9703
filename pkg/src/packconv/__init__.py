"""Companded, float-packed 1D convolution and cross-correlation.

Bounded integers are packed several to a double so that an unmodified
convolution core advances two or three outputs per multiply-accumulate;
an analytic noise model picks the packing per block under an SNR floor.
"""

from .companding import (
    CompandingSpec,
    MarginalStats,
    QuantizedSignal,
    compand,
    estimate_stats,
    from_integers,
    inverse_compand,
    round_half_away,
)
from .conv_core import (
    U_SYS_DEFAULT,
    BlockPlan,
    DirectBackend,
    FFTBackend,
    calibrate_usys,
    convolve_block,
    get_backend,
    plan_blocks,
    validate_backend,
)
from .errors import (
    BackendPrecisionFailure,
    BoundExceeded,
    ConfigError,
    DegenerateSignal,
    IndexOverrun,
    PackconvError,
    SeamMismatch,
    UnpackOverflow,
)
from .flops import flop_count, memory_samples
from .packing import (
    PackedKernel,
    PackedSignal,
    PackingMode,
    check_bound,
    companding_range,
    pack_asymmetric_signal,
    pack_symmetric_kernel,
    pack_symmetric_signal,
    packing_coefficient,
    packing_range,
)
from .pipeline import convolve, convolve_adaptive, convolve_integers, correlate
from .precision import (
    ModeDecision,
    SnrModel,
    calibrate,
    measured_snr_db,
    noise_power,
    predicted_snr_db,
    select_mode,
)
from .unpacking import UnpackContext, assemble_output, disentangle, unpack_asymmetric, unpack_symmetric

__version__ = "0.1.0"
