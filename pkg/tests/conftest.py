import json

import numpy as np
import pytest

from ptqkit import ArchDescriptor, ArchLayer, LayerDescriptor, ModelBundle, TensorRecord


def tiny_arch(name="tiny"):
    return ArchDescriptor(
        name=name,
        layers=(
            ArchLayer("conv", 8, 3, 3),
            ArchLayer("conv", 16, 8, 3),
            ArchLayer("fc", 10, 16, 1),
        ),
    )


def make_bundle(layer_dims, seed=0, name="crafted"):
    """Build a bundle from (kind, m, n, k) tuples with gaussian weights."""
    rng = np.random.default_rng(seed)
    layers = []
    tensors = {}
    for index, (kind, m, n, k) in enumerate(layer_dims):
        shape = (m, n, k, k) if kind == "conv" else (m, n)
        tensor_name = f"layer{index:03d}_{kind}"
        data = rng.normal(0.0, 0.1, size=shape).astype(np.float32)
        tensors[tensor_name] = TensorRecord(name=tensor_name, data=data)
        layers.append(
            LayerDescriptor(
                layer_index=index,
                kind=kind,
                out_channels=m,
                in_channels=n,
                kernel_size=k,
                tensor_name=tensor_name,
            )
        )
    return ModelBundle(model_name=name, layers=layers, tensors=tensors)


def bundle_from_tensors(arrays, kinds=None, name="crafted"):
    """Build a bundle directly from a list of numpy arrays (2-D or 4-D)."""
    layers = []
    tensors = {}
    for index, data in enumerate(arrays):
        data = np.asarray(data, dtype=np.float32)
        kind = (kinds[index] if kinds else None) or ("conv" if data.ndim == 4 else "fc")
        tensor_name = f"layer{index:03d}_{kind}"
        tensors[tensor_name] = TensorRecord(name=tensor_name, data=data)
        layers.append(
            LayerDescriptor(
                layer_index=index,
                kind=kind,
                out_channels=data.shape[0],
                in_channels=data.shape[1],
                kernel_size=data.shape[2] if data.ndim == 4 else 1,
                tensor_name=tensor_name,
            )
        )
    return ModelBundle(model_name=name, layers=layers, tensors=tensors)


@pytest.fixture
def arch_file(tmp_path):
    """A small architecture descriptor written to disk."""
    arch = {
        "name": "tiny-file",
        "total_params": 8 * 3 * 9 + 16 * 8 * 9 + 10 * 16,
        "layers": [
            {"kind": "conv", "m": 8, "n": 3, "k": 3},
            {"kind": "conv", "m": 16, "n": 8, "k": 3},
            {"kind": "fc", "m": 10, "n": 16, "k": 1},
        ],
    }
    path = tmp_path / "tiny_arch.json"
    path.write_text(json.dumps(arch))
    return path
