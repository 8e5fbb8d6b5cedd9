"""Model containers and their on-disk formats.

Two file types share one envelope:

    magic (4 bytes) | version (u32 LE) | header_len (u64 LE) | header | payload

The header is canonical UTF-8 JSON: keys sorted, no whitespace.  Offsets
inside the header are relative to the first payload byte.

`.ptqb` (magic ``PTQB``) holds float32 weights.  The header carries the
model name, one layer entry per weight tensor (dims under keys ``m``,
``n``, ``k``) and a tensor table mapping name to shape/offset/nbytes.
The payload is the raw little-endian float32 data of every tensor,
row-major, concatenated in ascending tensor-name order.

`.ptqq` (magic ``PTQQ``) holds a quantized model.  Each layer entry adds
the split point ``p``, the range bound ``l``, per-channel bit widths and
scales, and the offsets of two packed streams: the sign+magnitude code
stream and the one-bit-per-weight region mask (1 = outer region).  The
payload is, per layer in index order, the code bytes then the mask bytes.

Readers validate eagerly: magic, version, declared lengths, shape
consistency, stream bit-lengths and finiteness are all checked before a
model object is returned.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .bitpack import padded_len
from .errors import (
    BadMagicError,
    BitstreamLengthError,
    InvalidHeaderError,
    NonFiniteValueError,
    ShapeMismatchError,
    TruncatedPayloadError,
    VersionMismatchError,
)

MAGIC_BUNDLE = b"PTQB"
MAGIC_QUANT = b"PTQQ"
FORMAT_VERSION = 1

LAYER_KINDS = ("conv", "fc")


# ---------------------------------------------------------------------------
# in-memory types


@dataclass
class LayerDescriptor:
    """Shape metadata for one weight tensor.

    ``kind`` is "conv" (tensor shaped [out, in, k, k]) or "fc" (tensor
    shaped [out, in], kernel_size fixed at 1).
    """

    layer_index: int
    kind: str
    out_channels: int
    in_channels: int
    kernel_size: int
    tensor_name: str

    @property
    def weight_count(self) -> int:
        return self.out_channels * self.in_channels * self.kernel_size**2

    @property
    def weights_per_channel(self) -> int:
        return self.in_channels * self.kernel_size**2

    @property
    def expected_shape(self) -> tuple[int, ...]:
        if self.kind == "conv":
            return (
                self.out_channels,
                self.in_channels,
                self.kernel_size,
                self.kernel_size,
            )
        return (self.out_channels, self.in_channels)

    def validate(self) -> None:
        if self.kind not in LAYER_KINDS:
            raise ShapeMismatchError(f"unknown layer kind {self.kind!r}")
        if self.out_channels < 1 or self.in_channels < 1 or self.kernel_size < 1:
            raise ShapeMismatchError(
                f"layer {self.layer_index}: non-positive dimension"
            )
        if self.kind == "fc" and self.kernel_size != 1:
            raise ShapeMismatchError(
                f"layer {self.layer_index}: fc kernel_size must be 1"
            )


@dataclass
class TensorRecord:
    """A named float32 weight tensor."""

    name: str
    data: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    def validate(self) -> None:
        if self.data.dtype != np.float32:
            raise ShapeMismatchError(f"tensor {self.name!r} is not float32")
        if not np.isfinite(self.data).all():
            raise NonFiniteValueError(f"tensor {self.name!r} has non-finite values")

    def __eq__(self, other) -> bool:
        if not isinstance(other, TensorRecord):
            return NotImplemented
        return (
            self.name == other.name
            and self.shape == other.shape
            and self.data.tobytes() == other.data.tobytes()
        )


@dataclass
class ModelBundle:
    """A full-precision model: ordered layers plus their tensors."""

    model_name: str
    layers: list[LayerDescriptor]
    tensors: dict[str, TensorRecord] = field(default_factory=dict)

    @property
    def total_weights(self) -> int:
        return sum(layer.weight_count for layer in self.layers)

    def tensor_for(self, layer: LayerDescriptor) -> TensorRecord:
        return self.tensors[layer.tensor_name]

    def validate(self) -> None:
        _check_layer_order(self.layers)
        names = [layer.tensor_name for layer in self.layers]
        if len(set(names)) != len(names):
            raise ShapeMismatchError("two layers reference the same tensor")
        if set(names) != set(self.tensors):
            raise ShapeMismatchError("layer list and tensor table disagree")
        for layer in self.layers:
            layer.validate()
            tensor = self.tensors[layer.tensor_name]
            tensor.validate()
            if tensor.shape != layer.expected_shape:
                raise ShapeMismatchError(
                    f"tensor {tensor.name!r} shape {tensor.shape} does not match "
                    f"layer dims {layer.expected_shape}"
                )


@dataclass
class QuantizedLayer:
    """One quantized layer: metadata, per-channel params, packed streams.

    ``split`` is the boundary between the inner region [-split, split] and
    the outer region; ``bound`` is the largest weight magnitude.  Codes are
    sign+magnitude fields (sign in the top bit), packed channel by channel
    at that channel's bit width.  The mask has one bit per weight in the
    same order, set for outer-region weights.
    """

    layer_index: int
    kind: str
    out_channels: int
    in_channels: int
    kernel_size: int
    tensor_name: str
    split: float
    bound: float
    channel_bits: list[int]
    scales_dense: list[float]
    scales_sparse: list[float]
    codes: bytes
    codes_nbits: int
    mask: bytes
    mask_nbits: int

    @property
    def weight_count(self) -> int:
        return self.out_channels * self.in_channels * self.kernel_size**2

    @property
    def weights_per_channel(self) -> int:
        return self.in_channels * self.kernel_size**2

    @property
    def expected_shape(self) -> tuple[int, ...]:
        if self.kind == "conv":
            return (
                self.out_channels,
                self.in_channels,
                self.kernel_size,
                self.kernel_size,
            )
        return (self.out_channels, self.in_channels)

    def code_bits(self) -> int:
        return self.weights_per_channel * sum(self.channel_bits)

    def validate(self) -> None:
        if self.kind not in LAYER_KINDS:
            raise ShapeMismatchError(f"unknown layer kind {self.kind!r}")
        if self.out_channels < 1 or self.in_channels < 1 or self.kernel_size < 1:
            raise ShapeMismatchError(
                f"layer {self.layer_index}: non-positive dimension"
            )
        if self.kind == "fc" and self.kernel_size != 1:
            raise ShapeMismatchError(
                f"layer {self.layer_index}: fc kernel_size must be 1"
            )
        m = self.out_channels
        if not (len(self.channel_bits) == len(self.scales_dense) == len(self.scales_sparse) == m):
            raise ShapeMismatchError(
                f"layer {self.layer_index}: per-channel arrays must have length {m}"
            )
        if any(b < 2 or b > 32 for b in self.channel_bits):
            raise ShapeMismatchError(
                f"layer {self.layer_index}: channel bit widths must be in 2..32"
            )
        if not (np.isfinite(self.split) and np.isfinite(self.bound)):
            raise NonFiniteValueError(f"layer {self.layer_index}: non-finite params")
        if self.bound < 0 or self.split < 0:
            raise ShapeMismatchError(f"layer {self.layer_index}: negative range params")
        if self.bound == 0 and self.split != 0:
            raise ShapeMismatchError(
                f"layer {self.layer_index}: zero bound requires zero split"
            )
        if self.bound > 0 and not (0 < self.split <= self.bound * 0.5):
            raise ShapeMismatchError(
                f"layer {self.layer_index}: split must lie in (0, bound/2]"
            )
        scales = self.scales_dense + self.scales_sparse
        if not all(np.isfinite(s) and s >= 0 for s in scales):
            raise NonFiniteValueError(
                f"layer {self.layer_index}: scales must be finite and non-negative"
            )
        if self.codes_nbits != self.code_bits():
            raise BitstreamLengthError(
                f"layer {self.layer_index}: code stream holds {self.codes_nbits} "
                f"bits, channel widths require {self.code_bits()}"
            )
        if self.mask_nbits != self.weight_count:
            raise BitstreamLengthError(
                f"layer {self.layer_index}: mask holds {self.mask_nbits} bits "
                f"for {self.weight_count} weights"
            )
        if len(self.codes) != padded_len(self.codes_nbits):
            raise BitstreamLengthError(
                f"layer {self.layer_index}: code byte length does not match bits"
            )
        if len(self.mask) != padded_len(self.mask_nbits):
            raise BitstreamLengthError(
                f"layer {self.layer_index}: mask byte length does not match bits"
            )


@dataclass
class QuantizedModel:
    """A quantized model: ordered quantized layers."""

    model_name: str
    layers: list[QuantizedLayer]

    @property
    def total_weights(self) -> int:
        return sum(layer.weight_count for layer in self.layers)

    def validate(self) -> None:
        _check_layer_order(self.layers)
        names = [layer.tensor_name for layer in self.layers]
        if len(set(names)) != len(names):
            raise ShapeMismatchError("two layers reference the same tensor")
        for layer in self.layers:
            layer.validate()


def _check_layer_order(layers) -> None:
    indices = [layer.layer_index for layer in layers]
    if indices != list(range(len(layers))):
        raise ShapeMismatchError(
            f"layer indices must be 0..{len(layers) - 1} in order, got {indices}"
        )


# ---------------------------------------------------------------------------
# envelope


def _canonical_json(obj) -> bytes:
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), allow_nan=False
    ).encode("utf-8")


def _write_container(path, magic: bytes, header_obj, payload: bytes) -> None:
    header = _canonical_json(header_obj)
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(payload)


def _read_container(path, magic: bytes) -> tuple[dict, bytes]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != magic:
        raise BadMagicError(
            f"expected magic {magic!r}, found {blob[:4]!r}"
        )
    if len(blob) < 16:
        raise TruncatedPayloadError("file ends inside the fixed header")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"container version {version}, reader supports {FORMAT_VERSION}"
        )
    (header_len,) = struct.unpack_from("<Q", blob, 8)
    if 16 + header_len > len(blob):
        raise TruncatedPayloadError(
            f"header declares {header_len} bytes, file has {len(blob) - 16}"
        )
    try:
        header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InvalidHeaderError(f"header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise InvalidHeaderError("header must be a JSON object")
    return header, blob[16 + header_len :]


def _require(header: dict, key: str):
    try:
        return header[key]
    except KeyError:
        raise InvalidHeaderError(f"header missing field {key!r}") from None


# ---------------------------------------------------------------------------
# .ptqb read/write


def save_bundle(bundle: ModelBundle, path) -> None:
    """Validate and write a ModelBundle as a .ptqb file."""
    bundle.validate()
    table = {}
    chunks = []
    offset = 0
    for name in sorted(bundle.tensors):
        tensor = bundle.tensors[name]
        raw = np.ascontiguousarray(tensor.data, dtype="<f4").tobytes()
        table[name] = {
            "shape": list(tensor.shape),
            "offset": offset,
            "nbytes": len(raw),
        }
        chunks.append(raw)
        offset += len(raw)
    header = {
        "model_name": bundle.model_name,
        "layers": [
            {
                "layer_index": layer.layer_index,
                "kind": layer.kind,
                "m": layer.out_channels,
                "n": layer.in_channels,
                "k": layer.kernel_size,
                "tensor_name": layer.tensor_name,
            }
            for layer in bundle.layers
        ],
        "tensors": table,
    }
    _write_container(path, MAGIC_BUNDLE, header, b"".join(chunks))


def load_bundle(path) -> ModelBundle:
    """Read and validate a .ptqb file."""
    header, payload = _read_container(path, MAGIC_BUNDLE)
    layers = []
    for entry in _require(header, "layers"):
        try:
            layers.append(
                LayerDescriptor(
                    layer_index=int(entry["layer_index"]),
                    kind=str(entry["kind"]),
                    out_channels=int(entry["m"]),
                    in_channels=int(entry["n"]),
                    kernel_size=int(entry["k"]),
                    tensor_name=str(entry["tensor_name"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidHeaderError(f"bad layer entry: {exc}") from exc
    table = _require(header, "tensors")
    if not isinstance(table, dict):
        raise InvalidHeaderError("tensor table must be a JSON object")
    tensors = {}
    expected_offset = 0
    for name in sorted(table):
        entry = table[name]
        try:
            shape = tuple(int(d) for d in entry["shape"])
            offset = int(entry["offset"])
            nbytes = int(entry["nbytes"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidHeaderError(f"bad tensor entry {name!r}: {exc}") from exc
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        if nbytes != 4 * count:
            raise ShapeMismatchError(
                f"tensor {name!r}: shape {shape} needs {4 * count} bytes, "
                f"header declares {nbytes}"
            )
        if offset != expected_offset:
            raise TruncatedPayloadError(
                f"tensor {name!r}: expected offset {expected_offset}, "
                f"header declares {offset}"
            )
        if offset + nbytes > len(payload):
            raise TruncatedPayloadError(
                f"tensor {name!r} extends past end of payload"
            )
        data = (
            np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
            .reshape(shape)
            .copy()
        )
        tensors[name] = TensorRecord(name=name, data=data)
        expected_offset = offset + nbytes
    if expected_offset != len(payload):
        raise TruncatedPayloadError(
            f"payload has {len(payload)} bytes, tensors cover {expected_offset}"
        )
    bundle = ModelBundle(
        model_name=str(_require(header, "model_name")),
        layers=layers,
        tensors=tensors,
    )
    bundle.validate()
    return bundle


# ---------------------------------------------------------------------------
# .ptqq read/write


def save_quantized(model: QuantizedModel, path) -> None:
    """Validate and write a QuantizedModel as a .ptqq file."""
    model.validate()
    entries = []
    chunks = []
    offset = 0
    for layer in model.layers:
        codes_offset = offset
        chunks.append(layer.codes)
        offset += len(layer.codes)
        mask_offset = offset
        chunks.append(layer.mask)
        offset += len(layer.mask)
        entries.append(
            {
                "layer_index": layer.layer_index,
                "kind": layer.kind,
                "m": layer.out_channels,
                "n": layer.in_channels,
                "k": layer.kernel_size,
                "tensor_name": layer.tensor_name,
                "p": layer.split,
                "l": layer.bound,
                "channel_bits": list(layer.channel_bits),
                "scales_dense": list(layer.scales_dense),
                "scales_sparse": list(layer.scales_sparse),
                "codes_offset": codes_offset,
                "codes_nbits": layer.codes_nbits,
                "mask_offset": mask_offset,
                "mask_nbits": layer.mask_nbits,
            }
        )
    header = {"model_name": model.model_name, "layers": entries}
    _write_container(path, MAGIC_QUANT, header, b"".join(chunks))


def load_quantized(path) -> QuantizedModel:
    """Read and validate a .ptqq file."""
    header, payload = _read_container(path, MAGIC_QUANT)
    layers = []
    expected_offset = 0
    for entry in _require(header, "layers"):
        try:
            codes_offset = int(entry["codes_offset"])
            codes_nbits = int(entry["codes_nbits"])
            mask_offset = int(entry["mask_offset"])
            mask_nbits = int(entry["mask_nbits"])
            layer = QuantizedLayer(
                layer_index=int(entry["layer_index"]),
                kind=str(entry["kind"]),
                out_channels=int(entry["m"]),
                in_channels=int(entry["n"]),
                kernel_size=int(entry["k"]),
                tensor_name=str(entry["tensor_name"]),
                split=float(entry["p"]),
                bound=float(entry["l"]),
                channel_bits=[int(b) for b in entry["channel_bits"]],
                scales_dense=[float(s) for s in entry["scales_dense"]],
                scales_sparse=[float(s) for s in entry["scales_sparse"]],
                codes=b"",
                codes_nbits=codes_nbits,
                mask=b"",
                mask_nbits=mask_nbits,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidHeaderError(f"bad layer entry: {exc}") from exc
        codes_len = padded_len(codes_nbits)
        mask_len = padded_len(mask_nbits)
        if codes_offset != expected_offset or mask_offset != codes_offset + codes_len:
            raise TruncatedPayloadError(
                f"layer {layer.layer_index}: streams are not contiguous"
            )
        if mask_offset + mask_len > len(payload):
            raise TruncatedPayloadError(
                f"layer {layer.layer_index}: streams extend past end of payload"
            )
        layer.codes = payload[codes_offset : codes_offset + codes_len]
        layer.mask = payload[mask_offset : mask_offset + mask_len]
        expected_offset = mask_offset + mask_len
        layers.append(layer)
    if expected_offset != len(payload):
        raise TruncatedPayloadError(
            f"payload has {len(payload)} bytes, streams cover {expected_offset}"
        )
    model = QuantizedModel(model_name=str(_require(header, "model_name")), layers=layers)
    model.validate()
    return model
