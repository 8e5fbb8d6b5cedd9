"""Mixed-precision post-training weight quantization toolkit.

Pipeline: score layers and channels (`importance`), assign per-channel
bit widths, quantize each layer with a two-region sign+magnitude code
(`piecewise`), persist models in compact binary containers (`store`),
and measure sizes, errors and BOPs (`metrics`).  Synthetic CNN-scale
weight sets come from `synth`; `cli` ties everything together.
"""

from .bitpack import pack_flags, pack_groups, unpack_flags, unpack_groups
from .errors import (
    BadMagicError,
    BitstreamLengthError,
    DegenerateRangeError,
    EmptyBundleError,
    EmptyCdfError,
    InvalidHeaderError,
    NonFiniteValueError,
    PtqError,
    ShapeMismatchError,
    TruncatedPayloadError,
    VersionMismatchError,
    ZeroRangeError,
)
from .importance import (
    ImportanceConfig,
    ImportancePartition,
    channel_scores,
    layer_score,
    partition,
    round_half_away,
)
from .metrics import (
    QuantReport,
    baseline_size_bits,
    bops_layer,
    bops_layer_mixed,
    bops_model,
    build_report,
    emit_report,
    model_size_bits,
    mse_report,
    overhead_bits,
    size_reduction_pct,
    to_mbit,
    write_report_csv,
    write_report_json,
    write_sweep_csv,
)
from .piecewise import (
    DEFAULT_GRID_SIZE,
    EmpiricalCDF,
    PiecewiseParams,
    UniformQuantParams,
    c_of_b,
    clamp,
    dequantize_model,
    dequantize_piecewise,
    dequantize_uniform,
    expected_error_piecewise,
    expected_error_uniform,
    find_breakpoint,
    quantize_model,
    quantize_piecewise,
    quantize_uniform,
    uniform_roundtrip,
)
from .store import (
    LayerDescriptor,
    ModelBundle,
    QuantizedLayer,
    QuantizedModel,
    TensorRecord,
    load_bundle,
    load_quantized,
    save_bundle,
    save_quantized,
)
from .synth import (
    ArchDescriptor,
    ArchLayer,
    builtin_descriptor,
    gen_model,
    load_descriptor,
    resolve_descriptor,
)

__version__ = "0.1.0"
