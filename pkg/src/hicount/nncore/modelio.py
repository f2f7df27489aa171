"""Versioned model container: "HCNT" magic, JSON header, raw float32 weights.

One file can hold several named networks (an RPN stores its trunk and
head together) plus an ``extras`` dict for things like anchor layouts.
Weight blocks are little-endian float32 in layer order, kernel then
bias, so save/load round-trips are bit-exact.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .specs import Network, LayerParams, param_shapes, spec_from_dict, spec_to_dict

MAGIC = b"HCNT"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def save_model(path, networks, extras: dict | None = None) -> None:
    """Write one Network or a {name: Network} mapping to ``path``."""
    if isinstance(networks, Network):
        networks = {"net": networks}
    for name, net in networks.items():
        if net.dtype != np.float32:
            raise ValueError(f"network {name!r} must be float32 for serialization")
    header = {
        "format_version": FORMAT_VERSION,
        "networks": [{"name": name, "rng_seed": net.rng_seed, "spec": spec_to_dict(net.spec)}
                     for name, net in networks.items()],
        "extras": extras or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for net in networks.values():
            for params in net.weights:
                if params is None:
                    continue
                fh.write(np.ascontiguousarray(params.kernel, dtype="<f4").tobytes())
                fh.write(np.ascontiguousarray(params.bias, dtype="<f4").tobytes())


def load_model(path) -> tuple[dict[str, Network], dict]:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != MAGIC:
        raise ModelFormatError(f"{path}: bad magic {raw[:4]!r}")
    version, hlen = struct.unpack_from("<II", raw, 4)
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {version}")
    header = json.loads(raw[12:12 + hlen].decode("utf-8"))
    offset = 12 + hlen
    networks: dict[str, Network] = {}
    for entry in header["networks"]:
        spec = spec_from_dict(entry["spec"])
        weights: list[LayerParams | None] = []
        for shapes in param_shapes(spec):
            if shapes is None:
                weights.append(None)
                continue
            kshape, bshape = shapes
            ksize = int(np.prod(kshape)) * 4
            bsize = int(np.prod(bshape)) * 4
            if offset + ksize + bsize > len(raw):
                raise ModelFormatError(f"{path}: truncated weight block for {entry['name']!r}")
            kernel = np.frombuffer(raw, dtype="<f4", count=int(np.prod(kshape)),
                                   offset=offset).reshape(kshape).copy()
            offset += ksize
            bias = np.frombuffer(raw, dtype="<f4", count=int(np.prod(bshape)),
                                 offset=offset).reshape(bshape).copy()
            offset += bsize
            weights.append(LayerParams(kernel, bias))
        networks[entry["name"]] = Network(spec, weights, rng_seed=entry["rng_seed"])
    if offset != len(raw):
        raise ModelFormatError(f"{path}: {len(raw) - offset} trailing bytes")
    return networks, header.get("extras", {})


def load_single(path) -> Network:
    networks, _ = load_model(path)
    if len(networks) != 1:
        raise ModelFormatError(f"{path}: expected a single network, found {sorted(networks)}")
    return next(iter(networks.values()))
