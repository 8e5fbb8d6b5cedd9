"""Two-region weight quantization and the split-point search.

A layer's weights live in [-bound, bound] where bound is the largest
magnitude.  The range is cut into an inner region [-split, split] that
holds most of the mass and an outer region for the tails.  Each region
gets its own uniform grid: with b bits per weight, one bit stores the
sign and b-1 bits store the magnitude code, so each region has
2^(b-1) - 1 magnitude steps.  Step sizes are

    step_inner = split / (2^(b-1) - 1)
    step_outer = (bound - split) / (2^(b-1) - 1)

A weight x encodes as (sign, code, region): region is outer iff
|x| > split, the code rounds |x| (or |x| - split) to the nearest step,
and decode mirrors this exactly.

The split point is chosen per layer by minimizing a closed-form error
model.  A b-bit uniform quantizer over a width-w range has expected
squared error w^2 / (12 (2^b - 1)^2).  Weighting each region's error by
the empirical fraction of weights it holds and simplifying gives

    err(split) = coeff(b-1) * ((bound - split)^2
                 + bound * (2*split - bound) * frac(split))

where frac(split) is the fraction of weights with |x| <= split.  The
search evaluates err on the grid {bound * i / grid_size} for
i = 1 .. grid_size // 2 and keeps the smallest split on ties.  The
minimizer does not depend on b: coeff(b-1) scales every candidate
equally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bitpack import pack_flags, pack_groups, unpack_flags, unpack_groups
from .errors import DegenerateRangeError, EmptyCdfError, ZeroRangeError
from .importance import ImportancePartition
from .store import (
    LayerDescriptor,
    ModelBundle,
    QuantizedLayer,
    QuantizedModel,
    TensorRecord,
)

DEFAULT_GRID_SIZE = 200


def clamp(x, lo, hi):
    """Clamp a scalar or array into [lo, hi]."""
    return np.minimum(np.maximum(x, lo), hi)


def _round_half_away(values):
    # ties go away from zero for both signs
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


# ---------------------------------------------------------------------------
# single-region uniform quantizer


@dataclass(frozen=True)
class UniformQuantParams:
    """Affine quantizer over [lo, hi] with 2^bits levels and offset z."""

    lo: float
    hi: float
    bits: int
    offset: float

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError(f"bits must be at least 1, got {self.bits}")
        if self.hi < self.lo:
            raise ValueError(f"empty range [{self.lo}, {self.hi}]")

    @classmethod
    def from_range(cls, lo: float, hi: float, bits: int) -> "UniformQuantParams":
        return cls(lo=lo, hi=hi, bits=bits, offset=lo)

    @property
    def scale(self) -> float:
        return (self.hi - self.lo) / (2**self.bits - 1)


def quantize_uniform(x, params: UniformQuantParams):
    """Code = round((clamp(x) - offset) / scale), half away from zero."""
    scale = params.scale
    if scale == 0:
        raise ZeroRangeError(f"range [{params.lo}, {params.hi}] has zero width")
    codes = _round_half_away((clamp(x, params.lo, params.hi) - params.offset) / scale)
    if np.isscalar(x):
        return int(codes)
    return codes.astype(np.int64)


def dequantize_uniform(code, params: UniformQuantParams):
    """Reconstruction = offset + scale * code."""
    return params.offset + params.scale * np.asarray(code, dtype=np.float64)


def uniform_roundtrip(data: np.ndarray, bits: int) -> np.ndarray:
    """Quantize a tensor with one uniform grid over [min, max] and decode.

    The baseline the two-region scheme is compared against.  A constant
    tensor reconstructs exactly.
    """
    values = np.asarray(data, dtype=np.float64)
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        return np.full_like(values, lo, dtype=np.float32)
    params = UniformQuantParams.from_range(lo, hi, bits)
    decoded = dequantize_uniform(quantize_uniform(values, params), params)
    return decoded.astype(np.float32)


# ---------------------------------------------------------------------------
# error models


def c_of_b(bits: int) -> float:
    """Expected squared error of a b-bit unit-range uniform quantizer.

    Equals 1 / (12 (2^b - 1)^2); multiply by the squared range width.
    """
    if bits < 1:
        raise ValueError(f"bits must be at least 1, got {bits}")
    return 1.0 / (12.0 * (2.0**bits - 1.0) ** 2)


def expected_error_uniform(bits: int, lo: float, hi: float) -> float:
    """Model error of a single uniform grid over [lo, hi]."""
    if hi < lo:
        raise ValueError(f"empty range [{lo}, {hi}]")
    return c_of_b(bits) * (hi - lo) ** 2


class EmpiricalCDF:
    """Fraction of weights at or below a magnitude threshold."""

    def __init__(self, sorted_abs: np.ndarray):
        values = np.asarray(sorted_abs, dtype=np.float64).ravel()
        if values.size == 0:
            raise EmptyCdfError("no samples")
        self._values = values

    @classmethod
    def from_weights(cls, weights: np.ndarray) -> "EmpiricalCDF":
        return cls(np.sort(np.abs(np.asarray(weights, dtype=np.float64)).ravel()))

    @property
    def sample_count(self) -> int:
        return self._values.size

    @property
    def max_abs(self) -> float:
        return float(self._values[-1])

    def fraction_within(self, threshold):
        """P(|w| <= threshold); accepts a scalar or an array of thresholds."""
        counts = np.searchsorted(self._values, threshold, side="right")
        return counts / self._values.size


def expected_error_piecewise(bits: int, bound: float, split, cdf: EmpiricalCDF):
    """Model error of the two-region scheme at a candidate split.

    Valid for 0 < split < bound and bits >= 2 (each region keeps b-1
    magnitude bits).  Accepts an array of candidate splits.
    """
    if bits < 2:
        raise ValueError(f"two-region coding needs bits >= 2, got {bits}")
    split_arr = np.asarray(split, dtype=np.float64)
    if np.any(split_arr <= 0) or np.any(split_arr >= bound):
        raise ValueError("split must lie strictly inside (0, bound)")
    frac = cdf.fraction_within(split_arr)
    shape = (bound - split_arr) ** 2 + bound * (2.0 * split_arr - bound) * frac
    result = c_of_b(bits - 1) * shape
    if np.isscalar(split):
        return float(result)
    return result


def find_breakpoint(
    weights, bits: int, grid_size: int = DEFAULT_GRID_SIZE
) -> tuple[float, float]:
    """Grid-search the split that minimizes the two-region error model.

    ``weights`` is an array of weight (or magnitude) values, or a
    prebuilt EmpiricalCDF.  Candidates are bound * i / grid_size for
    i = 1 .. grid_size // 2.  Returns (split, model_error); ties resolve
    to the smallest split.
    """
    if grid_size < 2:
        raise ValueError(f"grid_size must be at least 2, got {grid_size}")
    if isinstance(weights, EmpiricalCDF):
        cdf = weights
    else:
        cdf = EmpiricalCDF.from_weights(weights)
    bound = cdf.max_abs
    if bound == 0.0:
        raise DegenerateRangeError("all weights are zero, no split exists")
    steps = np.arange(1, grid_size // 2 + 1, dtype=np.float64) / grid_size
    candidates = bound * steps
    errors = expected_error_piecewise(bits, bound, candidates, cdf)
    best = int(np.argmin(errors))  # first minimum = smallest split
    return float(candidates[best]), float(errors[best])


# ---------------------------------------------------------------------------
# two-region encode/decode


@dataclass(frozen=True)
class PiecewiseParams:
    """Per-channel coding parameters: range bound, split point, bit width."""

    bound: float
    split: float
    bits: int

    def __post_init__(self):
        if self.bits < 2:
            raise ValueError(f"two-region coding needs bits >= 2, got {self.bits}")
        if self.bound < 0:
            raise ValueError(f"bound must be non-negative, got {self.bound}")
        if self.bound == 0:
            if self.split != 0:
                raise ValueError("zero bound requires zero split")
        elif not 0 < self.split < self.bound:
            raise ValueError(
                f"split {self.split} must lie strictly inside (0, {self.bound})"
            )

    @property
    def magnitude_levels(self) -> int:
        return 2 ** (self.bits - 1) - 1

    @property
    def step_inner(self) -> float:
        return self.split / self.magnitude_levels

    @property
    def step_outer(self) -> float:
        return (self.bound - self.split) / self.magnitude_levels


def quantize_piecewise(x: float, params: PiecewiseParams) -> tuple[int, int, bool]:
    """Encode one value as (sign_bit, magnitude_code, is_outer).

    Zero is positive; magnitudes above the bound clamp to it.
    """
    sign_bit = 1 if x < 0 else 0
    magnitude = min(abs(x), params.bound)
    outer = magnitude > params.split
    if params.bound == 0:
        return sign_bit, 0, False
    if outer:
        code = int(np.floor((magnitude - params.split) / params.step_outer + 0.5))
    else:
        code = int(np.floor(magnitude / params.step_inner + 0.5))
    return sign_bit, min(code, params.magnitude_levels), outer


def dequantize_piecewise(
    sign_bit: int, code: int, is_outer: bool, params: PiecewiseParams
) -> float:
    """Decode (sign_bit, magnitude_code, is_outer) back to a float."""
    if is_outer:
        magnitude = params.split + params.step_outer * code
    else:
        magnitude = params.step_inner * code
    return -magnitude if sign_bit else magnitude


def _encode_layer(
    weights: np.ndarray, channel_bits: np.ndarray, bound: float, split: float
) -> tuple[list[np.ndarray], np.ndarray]:
    """Vectorized encode of a (channels, per_channel) weight matrix.

    Returns the per-channel packed-field arrays (sign in the top bit)
    and the flat outer-region flags in channel-major row-major order.
    """
    bits = np.asarray(channel_bits, dtype=np.int64).reshape(-1, 1)
    levels = (np.int64(1) << (bits - 1)) - 1
    magnitude = np.minimum(np.abs(weights), bound)
    sign_bit = (weights < 0).astype(np.uint64)
    if bound == 0.0:
        codes = np.zeros_like(weights, dtype=np.int64)
        outer = np.zeros(weights.shape, dtype=bool)
    else:
        outer = magnitude > split
        step_inner = split / levels
        step_outer = (bound - split) / levels
        codes = np.where(
            outer,
            np.floor((magnitude - split) / step_outer + 0.5),
            np.floor(magnitude / step_inner + 0.5),
        ).astype(np.int64)
        codes = np.minimum(codes, levels)
    fields = (sign_bit << (bits - 1).astype(np.uint64)) | codes.astype(np.uint64)
    return [fields[c] for c in range(fields.shape[0])], outer.ravel()


def _decode_layer(layer: QuantizedLayer) -> np.ndarray:
    """Decode one quantized layer back to its float32 tensor."""
    per_channel = layer.weights_per_channel
    groups = [(per_channel, b) for b in layer.channel_bits]
    fields = np.stack(unpack_groups(layer.codes, groups))
    outer = unpack_flags(layer.mask, layer.mask_nbits).reshape(
        layer.out_channels, per_channel
    )
    bits = np.asarray(layer.channel_bits, dtype=np.uint64).reshape(-1, 1)
    code_mask = (np.uint64(1) << (bits - np.uint64(1))) - np.uint64(1)
    codes = (fields & code_mask).astype(np.float64)
    sign = np.where(fields >> (bits - np.uint64(1)), -1.0, 1.0)
    step_inner = np.asarray(layer.scales_dense, dtype=np.float64).reshape(-1, 1)
    step_outer = np.asarray(layer.scales_sparse, dtype=np.float64).reshape(-1, 1)
    magnitude = np.where(
        outer, layer.split + step_outer * codes, step_inner * codes
    )
    values = (sign * magnitude).astype(np.float32)
    return values.reshape(layer.expected_shape)


# ---------------------------------------------------------------------------
# whole-model paths


def quantize_model(
    bundle: ModelBundle,
    partition: ImportancePartition,
    grid_size: int = DEFAULT_GRID_SIZE,
) -> QuantizedModel:
    """Quantize every layer under the partition's per-channel bit widths.

    The split is found once per layer, on the error model evaluated at
    the layer's widest bit width (the minimizer is width-independent).
    """
    if len(partition.channel_bits) != len(bundle.layers):
        raise ValueError("partition does not match the model's layer list")
    quantized = []
    for layer, bits in zip(bundle.layers, partition.channel_bits):
        data = bundle.tensor_for(layer).data
        weights = data.reshape(layer.out_channels, -1).astype(np.float64)
        sorted_abs = np.sort(np.abs(weights).ravel())
        bound = float(sorted_abs[-1])
        if bound == 0.0:
            split = 0.0
        else:
            cdf = EmpiricalCDF(sorted_abs)
            split, _ = find_breakpoint(cdf, bits=int(bits.max()), grid_size=grid_size)
        bits_arr = np.asarray(bits, dtype=np.int64)
        levels = (np.int64(1) << (bits_arr - 1)) - 1
        scales_dense = split / levels
        scales_sparse = (bound - split) / levels
        field_rows, outer = _encode_layer(weights, bits, bound, split)
        codes, codes_nbits = pack_groups(
            [(row, int(b)) for row, b in zip(field_rows, bits)]
        )
        mask, mask_nbits = pack_flags(outer)
        quantized.append(
            QuantizedLayer(
                layer_index=layer.layer_index,
                kind=layer.kind,
                out_channels=layer.out_channels,
                in_channels=layer.in_channels,
                kernel_size=layer.kernel_size,
                tensor_name=layer.tensor_name,
                split=split,
                bound=bound,
                channel_bits=[int(b) for b in bits],
                scales_dense=[float(s) for s in scales_dense],
                scales_sparse=[float(s) for s in scales_sparse],
                codes=codes,
                codes_nbits=codes_nbits,
                mask=mask,
                mask_nbits=mask_nbits,
            )
        )
    model = QuantizedModel(model_name=bundle.model_name, layers=quantized)
    model.validate()
    return model


def dequantize_model(model: QuantizedModel) -> ModelBundle:
    """Decode a quantized model back into a float32 bundle."""
    layers = []
    tensors = {}
    for qlayer in model.layers:
        layers.append(
            LayerDescriptor(
                layer_index=qlayer.layer_index,
                kind=qlayer.kind,
                out_channels=qlayer.out_channels,
                in_channels=qlayer.in_channels,
                kernel_size=qlayer.kernel_size,
                tensor_name=qlayer.tensor_name,
            )
        )
        tensors[qlayer.tensor_name] = TensorRecord(
            name=qlayer.tensor_name, data=_decode_layer(qlayer)
        )
    bundle = ModelBundle(model_name=model.model_name, layers=layers, tensors=tensors)
    bundle.validate()
    return bundle
