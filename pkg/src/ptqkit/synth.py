"""Synthetic weight generation from architecture descriptors.

A descriptor lists layer dims (kind, m, n, k) and a checked total
parameter count; two realistic CNN-scale descriptors ship as package
data under ``arch/``.  Weights are drawn from a zero-centered gaussian,
laplace or uniform distribution with a counter-based generator keyed by
(seed, layer_index), so any layer can be regenerated independently and
results do not depend on thread count or generation order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import InvalidHeaderError
from .store import LayerDescriptor, ModelBundle, TensorRecord

DISTRIBUTIONS = ("gaussian", "laplace", "uniform")
BUILTIN_ARCHS = ("resnet50-like", "mobilenetv2-like")


@dataclass(frozen=True)
class ArchLayer:
    """Dims of one layer: conv weights are (m, n, k, k), fc are (m, n)."""

    kind: str
    out_channels: int
    in_channels: int
    kernel_size: int

    @property
    def weight_count(self) -> int:
        return self.out_channels * self.in_channels * self.kernel_size**2

    @property
    def shape(self) -> tuple[int, ...]:
        if self.kind == "conv":
            return (
                self.out_channels,
                self.in_channels,
                self.kernel_size,
                self.kernel_size,
            )
        return (self.out_channels, self.in_channels)


@dataclass(frozen=True)
class ArchDescriptor:
    name: str
    layers: tuple[ArchLayer, ...]

    @property
    def total_params(self) -> int:
        return sum(layer.weight_count for layer in self.layers)


def _parse_descriptor(obj: dict, origin: str) -> ArchDescriptor:
    try:
        name = str(obj["name"])
        declared_total = int(obj["total_params"])
        raw_layers = obj["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidHeaderError(f"{origin}: bad descriptor: {exc}") from exc
    layers = []
    for i, entry in enumerate(raw_layers):
        try:
            layer = ArchLayer(
                kind=str(entry["kind"]),
                out_channels=int(entry["m"]),
                in_channels=int(entry["n"]),
                kernel_size=int(entry["k"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidHeaderError(f"{origin}: bad layer {i}: {exc}") from exc
        if layer.kind not in ("conv", "fc"):
            raise InvalidHeaderError(f"{origin}: layer {i}: unknown kind {layer.kind!r}")
        if layer.kind == "fc" and layer.kernel_size != 1:
            raise InvalidHeaderError(f"{origin}: layer {i}: fc requires k = 1")
        if min(layer.out_channels, layer.in_channels, layer.kernel_size) < 1:
            raise InvalidHeaderError(f"{origin}: layer {i}: non-positive dims")
        layers.append(layer)
    arch = ArchDescriptor(name=name, layers=tuple(layers))
    if arch.total_params != declared_total:
        raise InvalidHeaderError(
            f"{origin}: declared total_params {declared_total} but layers "
            f"sum to {arch.total_params}"
        )
    return arch


def load_descriptor(path) -> ArchDescriptor:
    """Read and check an architecture descriptor JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidHeaderError(f"{path}: not valid JSON: {exc}") from exc
    return _parse_descriptor(obj, str(path))


def builtin_descriptor(name: str) -> ArchDescriptor:
    """Load one of the descriptors shipped with the package."""
    if name not in BUILTIN_ARCHS:
        raise InvalidHeaderError(
            f"unknown architecture {name!r}; built-ins: {', '.join(BUILTIN_ARCHS)}"
        )
    filename = name.replace("-", "_") + ".json"
    text = resources.files("ptqkit").joinpath("arch", filename).read_text("utf-8")
    return _parse_descriptor(json.loads(text), name)


def resolve_descriptor(name_or_path: str) -> ArchDescriptor:
    """Accept a built-in architecture name or a descriptor file path."""
    if name_or_path in BUILTIN_ARCHS:
        return builtin_descriptor(name_or_path)
    return load_descriptor(name_or_path)


def _layer_rng(seed: int, layer_index: int) -> np.random.Generator:
    # counter-based generator keyed per layer: regeneration order-free
    return np.random.Generator(np.random.Philox(key=[seed, layer_index]))


def gen_model(
    arch: ArchDescriptor,
    dist: str = "gaussian",
    scale: float = 0.05,
    seed: int = 0,
) -> ModelBundle:
    """Draw a full weight set for the descriptor.

    ``scale`` is the gaussian sigma, the laplace scale, or the uniform
    half-range.  The same (arch, dist, scale, seed) always produces a
    bit-identical bundle.
    """
    if dist not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {dist!r}; choose from {DISTRIBUTIONS}")
    if not (np.isfinite(scale) and scale > 0):
        raise ValueError(f"scale must be positive and finite, got {scale}")
    layers = []
    tensors = {}
    for index, arch_layer in enumerate(arch.layers):
        rng = _layer_rng(seed, index)
        count = arch_layer.weight_count
        if dist == "gaussian":
            values = rng.standard_normal(count) * scale
        elif dist == "laplace":
            values = rng.laplace(0.0, scale, count)
        else:
            values = rng.uniform(-scale, scale, count)
        name = f"layer{index:03d}_{arch_layer.kind}"
        tensors[name] = TensorRecord(
            name=name,
            data=values.astype(np.float32).reshape(arch_layer.shape),
        )
        layers.append(
            LayerDescriptor(
                layer_index=index,
                kind=arch_layer.kind,
                out_channels=arch_layer.out_channels,
                in_channels=arch_layer.in_channels,
                kernel_size=arch_layer.kernel_size,
                tensor_name=name,
            )
        )
    return ModelBundle(
        model_name=f"{arch.name}-{dist}-seed{seed}",
        layers=layers,
        tensors=tensors,
    )
