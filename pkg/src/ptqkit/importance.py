"""Layer and channel importance scoring and the bit-width partition.

A model is split along two axes before quantization:

* ``alpha`` percent of layers (by descending layer score, ties broken
  toward the lower layer index) are marked important.
* Inside an important layer, a ``beta`` fraction of output channels (by
  descending channel score) is marked important; inside an unimportant
  layer only a ``1 - beta`` fraction is.

Important channels are assigned ``bits_important``, everything else
``bits_other``.  The layer score is the sum of absolute weights
(optionally divided by the weight count); the channel score is the
Euclidean norm of that output channel's slice.

Counts are rounded half away from zero and clamped to the valid range,
so ``alpha = 0`` marks no layer and ``alpha = 100`` marks every layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyBundleError
from .store import ModelBundle


@dataclass(frozen=True)
class ImportanceConfig:
    """Knobs for the importance partition.

    alpha is a percentage in [0, 100]; beta a fraction in [0, 1].
    Bit widths must satisfy bits_important >= bits_other >= 2.
    """

    alpha: float
    beta: float = 0.5
    bits_important: int = 8
    bits_other: int = 2
    normalize_layer_score: bool = False

    def validate(self) -> None:
        if not 0.0 <= self.alpha <= 100.0:
            raise ValueError(f"alpha must be in [0, 100], got {self.alpha}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        if self.bits_other < 2:
            raise ValueError(f"bits_other must be at least 2, got {self.bits_other}")
        if self.bits_important < self.bits_other:
            raise ValueError(
                f"bits_important ({self.bits_important}) must not be below "
                f"bits_other ({self.bits_other})"
            )
        if self.bits_important > 32:
            raise ValueError(f"bits_important must be at most 32, got {self.bits_important}")


@dataclass
class ImportancePartition:
    """Result of the partition: scores, marks and per-channel bit widths."""

    config: ImportanceConfig
    layer_scores: list[float]
    important_layers: set[int]
    channel_scores: list[np.ndarray] = field(repr=False)
    important_channels: list[set[int]]
    channel_bits: list[np.ndarray] = field(repr=False)


def round_half_away(x: float) -> int:
    """Round a non-negative count half away from zero (2.5 -> 3)."""
    return int(math.floor(x + 0.5))


def layer_score(data: np.ndarray, normalize: bool = False) -> float:
    """Sum of absolute weights, optionally divided by the weight count."""
    total = float(np.abs(data, dtype=np.float64).sum())
    if normalize:
        total /= data.size
    return total


def channel_scores(data: np.ndarray) -> np.ndarray:
    """Euclidean norm of each output-channel slice (axis 0)."""
    flat = data.reshape(data.shape[0], -1).astype(np.float64)
    return np.sqrt((flat * flat).sum(axis=1))


def _top_indices(scores: np.ndarray, count: int) -> set[int]:
    # stable argsort on the negated scores keeps lower indices first on ties
    order = np.argsort(-scores, kind="stable")
    return set(int(i) for i in order[:count])


def partition(bundle: ModelBundle, config: ImportanceConfig) -> ImportancePartition:
    """Score the model and assign a bit width to every output channel."""
    config.validate()
    num_layers = len(bundle.layers)
    if num_layers == 0:
        raise EmptyBundleError("cannot partition a model with no layers")

    scores = np.array(
        [
            layer_score(bundle.tensor_for(layer).data, config.normalize_layer_score)
            for layer in bundle.layers
        ]
    )
    count_important = min(
        num_layers, max(0, round_half_away(config.alpha / 100.0 * num_layers))
    )
    important_layers = _top_indices(scores, count_important)

    per_layer_channel_scores = []
    important_channels = []
    channel_bits = []
    for layer in bundle.layers:
        ch_scores = channel_scores(bundle.tensor_for(layer).data)
        channels = layer.out_channels
        share = config.beta if layer.layer_index in important_layers else 1.0 - config.beta
        count = min(channels, max(0, round_half_away(share * channels)))
        marked = _top_indices(ch_scores, count)
        bits = np.full(channels, config.bits_other, dtype=np.int64)
        bits[sorted(marked)] = config.bits_important
        per_layer_channel_scores.append(ch_scores)
        important_channels.append(marked)
        channel_bits.append(bits)

    return ImportancePartition(
        config=config,
        layer_scores=[float(s) for s in scores],
        important_layers=important_layers,
        channel_scores=per_layer_channel_scores,
        important_channels=important_channels,
        channel_bits=channel_bits,
    )
