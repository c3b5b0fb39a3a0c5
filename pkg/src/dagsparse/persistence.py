"""On-disk formats: raw tensor files and training checkpoints.

Both formats are little-endian and platform-independent.  The tensor
format is a plain header + row-major payload so external datasets can be
imported without any Python-specific tooling.  Checkpoints carry the
complete training state (graph, parameters, optimizer, RNG) behind a
versioned, checksummed header so a run continues bit-identically.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict

import numpy as np

from . import network as net
from .autograd import BatchNormState, Tensor
from .dag import DagSpec, EdgeParams
from .training import TrainConfig, TrainLog, TrainState

TENSOR_MAGIC = b"TNSR"
CHECKPOINT_MAGIC = b"DGSP"
CHECKPOINT_VERSION = 1

_DTYPES = {"f4": "<f4", "f8": "<f8", "i4": "<i4", "i8": "<i8", "u1": "|u1"}


# ---------------------------------------------------------------------------
# raw tensor files


def save_tensor(path, array: np.ndarray) -> None:
    """Write one array: magic, u32 ndim, u64 dims, dtype tag, payload."""
    code = array.dtype.str.lstrip("<>|=")
    if code not in _DTYPES:
        raise ValueError(f"unsupported dtype {array.dtype}")
    with open(path, "wb") as f:
        f.write(TENSOR_MAGIC)
        f.write(struct.pack("<I", array.ndim))
        for dim in array.shape:
            f.write(struct.pack("<Q", dim))
        f.write(code.encode("ascii").ljust(4, b"\0"))
        f.write(np.ascontiguousarray(array, dtype=_DTYPES[code]).tobytes())


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.read(4) != TENSOR_MAGIC:
            raise ValueError(f"{path}: not a tensor file (bad magic)")
        ndim, = struct.unpack("<I", f.read(4))
        shape = tuple(struct.unpack("<Q", f.read(8))[0] for _ in range(ndim))
        code = f.read(4).rstrip(b"\0").decode("ascii")
        if code not in _DTYPES:
            raise ValueError(f"{path}: unknown dtype tag {code!r}")
        data = f.read()
    expect = int(np.prod(shape)) * np.dtype(_DTYPES[code]).itemsize
    if len(data) != expect:
        raise ValueError(f"{path}: payload is {len(data)} bytes, "
                         f"expected {expect}")
    return np.frombuffer(data, dtype=_DTYPES[code]).reshape(shape).copy()


def save_dataset(prefix, d) -> None:
    """Write a dataset as four tensor files sharing a path prefix."""
    save_tensor(f"{prefix}.train_images.tns", d.train_images)
    save_tensor(f"{prefix}.train_labels.tns", d.train_labels.astype(np.int64))
    save_tensor(f"{prefix}.test_images.tns", d.test_images)
    save_tensor(f"{prefix}.test_labels.tns", d.test_labels.astype(np.int64))


def load_dataset(prefix, name: str = "", difficulty: int = 0):
    from .data import Dataset
    return Dataset(load_tensor(f"{prefix}.train_images.tns"),
                   load_tensor(f"{prefix}.train_labels.tns"),
                   load_tensor(f"{prefix}.test_images.tns"),
                   load_tensor(f"{prefix}.test_labels.tns"),
                   name=name, difficulty=difficulty)


# ---------------------------------------------------------------------------
# checkpoints


def _pack_arrays(arrays: dict[str, np.ndarray]) -> tuple[dict, bytes]:
    """(manifest, blob): each array row-major little-endian, in name order."""
    manifest = {}
    chunks = []
    offset = 0
    for name in sorted(arrays):
        a = arrays[name]
        code = a.dtype.str.lstrip("<>|=")
        if code not in _DTYPES:
            raise ValueError(f"unsupported dtype {a.dtype} for {name}")
        raw = np.ascontiguousarray(a, dtype=_DTYPES[code]).tobytes()
        manifest[name] = {"shape": list(a.shape), "dtype": code,
                          "offset": offset, "size": len(raw)}
        chunks.append(raw)
        offset += len(raw)
    return manifest, b"".join(chunks)


def _unpack_arrays(manifest: dict, blob: bytes) -> dict[str, np.ndarray]:
    out = {}
    for name, m in manifest.items():
        raw = blob[m["offset"]:m["offset"] + m["size"]]
        out[name] = (np.frombuffer(raw, dtype=_DTYPES[m["dtype"]])
                     .reshape(m["shape"]).copy())
    return out


def save_checkpoint(path, g: DagSpec, cfg: net.NetConfig, tcfg: TrainConfig,
                    state: TrainState) -> None:
    """Serialize a full training state.

    Layout: magic "DGSP", u32 version, u32 crc32 of the payload, u64
    payload length, payload = u64 json length + json header + array blob.
    """
    arrays = {}
    for name, t in state.params.tensors.items():
        arrays["param/" + name] = t.data
    bn_momentum = {}
    for name, s in state.params.bn_states.items():
        arrays["bn_mean/" + name] = s.mean
        arrays["bn_var/" + name] = s.var
        bn_momentum[name] = s.momentum
    arrays["edges/raw"] = state.raw
    for name, v in state.velocities.items():
        arrays["velocity/" + name] = v
    for i, snap in enumerate(state.log.snapshots):
        arrays[f"snapshot/{i:06d}"] = snap
    manifest, blob = _pack_arrays(arrays)

    header = {
        "graph": {"node_count": g.node_count, "stage_of": list(g.stage_of),
                  "edges": [list(e) for e in g.edges],
                  "input_node": g.input_node, "output_node": g.output_node},
        "net_config": asdict(cfg),
        "train_config": asdict(tcfg),
        "epochs_done": state.epochs_done,
        "step": state.step,
        "rng_state": state.rng_state,
        "bn_momentum": bn_momentum,
        "log": {"train_loss": state.log.train_loss,
                "sparsity_loss": state.log.sparsity_loss,
                "test_accuracy": state.log.test_accuracy,
                "lr": state.log.lr,
                "snapshot_steps": state.log.snapshot_steps},
        "arrays": manifest,
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = struct.pack("<Q", len(head)) + head + blob
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        f.write(struct.pack("<I", zlib.crc32(payload)))
        f.write(struct.pack("<Q", len(payload)))
        f.write(payload)


def load_checkpoint(path) -> tuple[DagSpec, net.NetConfig, TrainConfig,
                                   TrainState]:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    version, = struct.unpack("<I", data[4:8])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    crc, = struct.unpack("<I", data[8:12])
    size, = struct.unpack("<Q", data[12:20])
    payload = data[20:20 + size]
    if len(payload) != size or zlib.crc32(payload) != crc:
        raise ValueError(f"{path}: checksum mismatch (truncated or corrupt)")
    head_len, = struct.unpack("<Q", payload[:8])
    header = json.loads(payload[8:8 + head_len].decode("utf-8"))
    arrays = _unpack_arrays(header["arrays"], payload[8 + head_len:])

    gh = header["graph"]
    g = DagSpec(gh["node_count"], tuple(gh["stage_of"]),
                tuple(tuple(e) for e in gh["edges"]),
                gh["input_node"], gh["output_node"])
    nc = header["net_config"]
    cfg = net.NetConfig(**nc)
    tc = dict(header["train_config"])
    tc["lr_drop_epochs"] = tuple(tc["lr_drop_epochs"])
    tcfg = TrainConfig(**tc)

    params = net.NetworkParams()
    for name, a in arrays.items():
        if name.startswith("param/"):
            params.tensors[name[6:]] = Tensor(a, name=name[6:])
    for name, mom in header["bn_momentum"].items():
        s = BatchNormState(len(arrays["bn_mean/" + name]), momentum=mom,
                           dtype=arrays["bn_mean/" + name].dtype)
        s.mean = arrays["bn_mean/" + name]
        s.var = arrays["bn_var/" + name]
        params.bn_states[name] = s
    velocities = {name[9:]: a for name, a in arrays.items()
                  if name.startswith("velocity/")}
    log = TrainLog(train_loss=header["log"]["train_loss"],
                   sparsity_loss=header["log"]["sparsity_loss"],
                   test_accuracy=header["log"]["test_accuracy"],
                   lr=header["log"]["lr"],
                   snapshot_steps=header["log"]["snapshot_steps"],
                   snapshots=[arrays[k] for k in sorted(arrays)
                              if k.startswith("snapshot/")])
    state = TrainState(header["epochs_done"], header["step"], params,
                       arrays["edges/raw"], velocities, header["rng_state"],
                       log)
    return g, cfg, tcfg, state


def save_trained(path, g: DagSpec, cfg: net.NetConfig, tcfg: TrainConfig,
                 params: net.NetworkParams, edges: EdgeParams,
                 log: TrainLog) -> None:
    """Checkpoint a finished run (no optimizer velocity carried over)."""
    state = TrainState(tcfg.epochs, 0, params,
                       edges.raw.astype(np.dtype(tcfg.dtype)), {},
                       np.random.default_rng(tcfg.seed).bit_generator.state,
                       log)
    save_checkpoint(path, g, cfg, tcfg, state)
