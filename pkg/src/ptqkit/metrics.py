"""Model size, BOPs and quantization-error reporting.

Sizes count exactly the per-weight code bits (a channel at b bits costs
b bits per weight); the one-bit-per-weight region mask and the per-layer
metadata are reported separately as overhead.  Mbit means 10^6 bits.

BOPs (bit operations) for one layer with m output channels, n input
channels and kernel size k, at activation width b_a and weight width b_w:

    m * n * k^2 * (b_a * b_w + b_a + b_w * log2(n * k^2))

Mixed precision splits m proportionally: each group of channels sharing
one width contributes the formula evaluated with its own m and b_w, which
reduces to the plain formula when all channels agree.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .piecewise import dequantize_model
from .store import ModelBundle, QuantizedModel

MBIT = 1e6


def to_mbit(bits) -> float:
    return bits / MBIT


def _dims(layer) -> tuple[int, int, int]:
    return layer.out_channels, layer.in_channels, layer.kernel_size


def model_size_bits(layers, channel_bits) -> int:
    """Total code bits for per-channel widths, or one width for all.

    ``layers`` is any sequence with out_channels/in_channels/kernel_size
    attributes; ``channel_bits`` is either a single integer or one array
    of per-channel widths per layer.
    """
    if isinstance(channel_bits, (int, np.integer)):
        return int(channel_bits) * sum(
            m * n * k * k for m, n, k in map(_dims, layers)
        )
    if len(channel_bits) != len(layers):
        raise ValueError("channel_bits must provide one entry per layer")
    total = 0
    for layer, bits in zip(layers, channel_bits):
        m, n, k = _dims(layer)
        bits = np.asarray(bits)
        if bits.size != m:
            raise ValueError(
                f"layer {layer.layer_index}: {bits.size} widths for {m} channels"
            )
        total += int(bits.sum()) * n * k * k
    return total


def baseline_size_bits(layers) -> int:
    """Size of the float32 original: 32 bits per weight."""
    return model_size_bits(layers, 32)


def size_reduction_pct(baseline_bits: int, quantized_bits: int) -> float:
    """100 * (1 - quantized/baseline)."""
    if baseline_bits <= 0:
        raise ValueError("baseline size must be positive")
    return 100.0 * (1.0 - quantized_bits / baseline_bits)


def overhead_bits(model: QuantizedModel) -> int:
    """Storage not counted in the headline size: mask and metadata.

    Per layer: the region mask (1 bit per weight), per-channel metadata
    (8-bit width plus two 64-bit scales) and the two 64-bit range
    scalars.
    """
    total = 0
    for layer in model.layers:
        total += layer.mask_nbits
        total += layer.out_channels * (8 + 64 + 64)
        total += 2 * 64
    return total


def bops_layer(m: int, n: int, k: int, act_bits: int, weight_bits: int) -> float:
    """Bit operations of one layer at a single weight width."""
    if min(m, n, k, act_bits, weight_bits) < 1:
        raise ValueError("all BOPs arguments must be positive")
    receptive = n * k * k
    return m * receptive * (
        act_bits * weight_bits + act_bits + weight_bits * math.log2(receptive)
    )


def bops_layer_mixed(
    m: int, n: int, k: int, act_bits: int, channel_bits
) -> float:
    """Bit operations with per-channel widths (proportional split of m)."""
    widths = Counter(int(b) for b in np.asarray(channel_bits).ravel())
    if sum(widths.values()) != m:
        raise ValueError(f"{sum(widths.values())} widths for {m} channels")
    return sum(
        bops_layer(count, n, k, act_bits, width)
        for width, count in sorted(widths.items())
    )


def bops_model(layers, channel_bits, act_bits: int) -> float:
    """Total bit operations across layers.

    ``channel_bits`` follows the model_size_bits convention: one integer
    for a uniform width or one per-channel array per layer.
    """
    total = 0.0
    uniform = isinstance(channel_bits, (int, np.integer))
    if not uniform and len(channel_bits) != len(layers):
        raise ValueError("channel_bits must provide one entry per layer")
    for i, layer in enumerate(layers):
        m, n, k = _dims(layer)
        if uniform:
            total += bops_layer(m, n, k, act_bits, int(channel_bits))
        else:
            total += bops_layer_mixed(m, n, k, act_bits, channel_bits[i])
    return total


# ---------------------------------------------------------------------------
# report


@dataclass
class LayerReport:
    layer_index: int
    params: int
    bits_histogram: dict[int, int]
    split: float
    bound: float
    mse: float
    bops: float


@dataclass
class QuantReport:
    """Evaluation record for one quantized model."""

    model_name: str
    baseline_bits: int
    quantized_bits: int
    overhead_bits: int
    size_reduction_pct: float
    total_mse: float
    total_bops: float
    config: dict
    layers: list[LayerReport]

    def to_dict(self) -> dict:
        return {
            "model_name": self.model_name,
            "baseline_bits": self.baseline_bits,
            "quantized_bits": self.quantized_bits,
            "overhead_bits": self.overhead_bits,
            "baseline_mbit": to_mbit(self.baseline_bits),
            "quantized_mbit": to_mbit(self.quantized_bits),
            "size_reduction_pct": self.size_reduction_pct,
            "total_mse": self.total_mse,
            "total_bops": self.total_bops,
            "config": dict(self.config),
            "layers": [
                {
                    "layer_index": layer.layer_index,
                    "params": layer.params,
                    "bits_histogram": {
                        str(width): count
                        for width, count in sorted(layer.bits_histogram.items())
                    },
                    "p": layer.split,
                    "l": layer.bound,
                    "mse": layer.mse,
                    "bops": layer.bops,
                }
                for layer in self.layers
            ],
        }


def build_report(
    bundle: ModelBundle,
    quantized: QuantizedModel,
    act_bits: int = 8,
    config: dict | None = None,
) -> QuantReport:
    """Measure a quantized model against its float32 original."""
    if len(bundle.layers) != len(quantized.layers):
        raise ValueError("bundle and quantized model have different layer counts")
    decoded = dequantize_model(quantized)
    layer_reports = []
    squared_error_sum = 0.0
    total_weights = 0
    for layer, qlayer in zip(bundle.layers, quantized.layers):
        if layer.tensor_name != qlayer.tensor_name:
            raise ValueError(
                f"layer {layer.layer_index}: tensor names disagree "
                f"({layer.tensor_name!r} vs {qlayer.tensor_name!r})"
            )
        original = bundle.tensor_for(layer).data.astype(np.float64)
        restored = decoded.tensors[qlayer.tensor_name].data.astype(np.float64)
        diff = restored - original
        squared = float((diff * diff).sum())
        count = layer.weight_count
        squared_error_sum += squared
        total_weights += count
        m, n, k = _dims(layer)
        layer_reports.append(
            LayerReport(
                layer_index=layer.layer_index,
                params=count,
                bits_histogram=dict(Counter(qlayer.channel_bits)),
                split=qlayer.split,
                bound=qlayer.bound,
                mse=squared / count,
                bops=bops_layer_mixed(m, n, k, act_bits, qlayer.channel_bits),
            )
        )
    baseline = baseline_size_bits(bundle.layers)
    quantized_size = model_size_bits(
        quantized.layers, [layer.channel_bits for layer in quantized.layers]
    )
    merged_config = {"act_bits": act_bits}
    if config:
        merged_config.update(config)
    return QuantReport(
        model_name=bundle.model_name,
        baseline_bits=baseline,
        quantized_bits=quantized_size,
        overhead_bits=overhead_bits(quantized),
        size_reduction_pct=size_reduction_pct(baseline, quantized_size),
        total_mse=squared_error_sum / total_weights,
        total_bops=sum(layer.bops for layer in layer_reports),
        config=merged_config,
        layers=layer_reports,
    )


def mse_report(original, quantized) -> tuple[list[float], float]:
    """Per-layer and total round-trip MSE for a bundle/quantized pair."""
    report = build_report(original, quantized)
    return [layer.mse for layer in report.layers], report.total_mse


def write_report_json(report: QuantReport, path) -> None:
    """Serialize a report as JSON with sorted keys (byte-deterministic)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


CSV_COLUMNS = ["layer_index", "params", "bits_histogram", "p", "l", "mse", "bops"]


def histogram_cell(histogram: dict[int, int]) -> str:
    return ";".join(f"{width}:{count}" for width, count in sorted(histogram.items()))


def write_report_csv(report: QuantReport, path) -> None:
    """One row per layer with the fixed column set."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for layer in report.layers:
            writer.writerow(
                [
                    layer.layer_index,
                    layer.params,
                    histogram_cell(layer.bits_histogram),
                    repr(layer.split),
                    repr(layer.bound),
                    repr(layer.mse),
                    repr(layer.bops),
                ]
            )


def emit_report(report: QuantReport, path, format: str) -> None:
    """Write a report as "json" or "csv"; any other format is rejected."""
    if format == "json":
        write_report_json(report, path)
    elif format == "csv":
        write_report_csv(report, path)
    else:
        raise ValueError(f"unknown report format: {format!r}")


SWEEP_COLUMNS = ["alpha", "size_mbit", "total_mse", "total_bops"]


def write_sweep_csv(rows: list[dict], path) -> None:
    """Alpha-sweep table; MSE stands in for task accuracy (no inference)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# total_mse substitutes for task accuracy; no inference is run\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    repr(float(row["alpha"])),
                    repr(float(row["size_mbit"])),
                    repr(float(row["total_mse"])),
                    repr(float(row["total_bops"])),
                ]
            )
