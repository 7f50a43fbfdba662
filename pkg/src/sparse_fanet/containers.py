"""Binary containers for network weights and generated datasets.

Weights (all little-endian)::

    magic     4s   b"FANW"
    version   u16  1
    reserved  u16  0
    F D d H   4*u32
    flags     u32  bit0 residual, bit1 layer_norm, bit2 sparsity feature, bit3 mask channel
    seed      i64  training master seed, -1 if unknown
    n_values  u64  total float count of the payload
    payload   f32  row-major tensors in TENSOR_ORDER

Dataset::

    magic     4s   b"FADS"
    version   u16  1
    reserved  u16  0
    N         u32
    k_max     u32
    count     u64
    seed      i64
    fov       2*f64
    amp_range 2*f64
    spacings  N*f64
    records   count * (N*(f32 re, f32 im), u32 K, k_max*(f64 angle_deg, f64 re, f64 im))

Unused target slots in a record are zero.
"""
import struct

import numpy as np

from .array_model import ArrayGeometry, TargetSet
from .errors import FormatError
from .fanet import TENSOR_ORDER, ModelConfig, NetParams, tensor_shapes
from .tokens import TokenConfig
from .training import iter_dataset

WEIGHTS_MAGIC = b"FANW"
DATASET_MAGIC = b"FADS"
VERSION = 1

_W_HEADER = struct.Struct("<4sHH4IIqQ")
_D_HEADER = struct.Struct("<4sHHIIQq4d")


def _flags(model_cfg, token_cfg):
    return (int(model_cfg.residual) | int(model_cfg.layer_norm) << 1
            | int(token_cfg.sparsity_feature) << 2 | int(token_cfg.mask_channel) << 3)


def serialize_params(params, model_cfg=ModelConfig(), token_cfg=TokenConfig(), seed=-1):
    F, D, d, H = params.dims
    n_values = params.n_params()
    head = _W_HEADER.pack(WEIGHTS_MAGIC, VERSION, 0, F, D, d, H,
                          _flags(model_cfg, token_cfg), int(seed), n_values)
    body = b"".join(np.ascontiguousarray(a, dtype="<f4").tobytes() for a in params.tensors())
    return head + body


class Checkpoint:
    """Deserialized weight container."""

    def __init__(self, params, model_cfg, token_cfg, seed):
        self.params = params
        self.model_cfg = model_cfg
        self.token_cfg = token_cfg
        self.seed = seed


def deserialize_checkpoint(blob):
    blob = bytes(blob)
    if len(blob) < _W_HEADER.size:
        raise FormatError("header", f"need {_W_HEADER.size} bytes, got {len(blob)}")
    magic, version, _, F, D, d, H, flags, seed, n_values = _W_HEADER.unpack_from(blob)
    if magic != WEIGHTS_MAGIC:
        raise FormatError("magic", f"expected {WEIGHTS_MAGIC!r}, got {magic!r}")
    if version != VERSION:
        raise FormatError("version", f"unsupported version {version}")
    if min(F, D, d, H) == 0:
        raise FormatError("dims", f"zero dimension in {(F, D, d, H)}")
    shapes = tensor_shapes((F, D, d, H))
    expected = sum(int(np.prod(s)) for s in shapes.values())
    if n_values != expected:
        raise FormatError("dims", f"header dims {(F, D, d, H)} imply {expected} values, "
                                  f"n_values says {n_values}")
    off = _W_HEADER.size
    tensors = {}
    for name in TENSOR_ORDER:
        shape = shapes[name]
        nbytes = 4 * int(np.prod(shape))
        if off + nbytes > len(blob):
            raise FormatError(name, f"truncated: need {nbytes} bytes, {len(blob) - off} left")
        tensors[name] = np.frombuffer(blob, dtype="<f4", count=nbytes // 4,
                                      offset=off).astype(np.float32).reshape(shape)
        off += nbytes
    if off != len(blob):
        raise FormatError("payload", f"{len(blob) - off} trailing bytes after last tensor")
    model_cfg = ModelConfig(D, d, H, residual=bool(flags & 1), layer_norm=bool(flags & 2))
    token_cfg = TokenConfig(sparsity_feature=bool(flags & 4), mask_channel=bool(flags & 8))
    return Checkpoint(NetParams(**tensors), model_cfg, token_cfg, seed)


def deserialize_params(blob):
    return deserialize_checkpoint(blob).params


def save_checkpoint(path, params, model_cfg=ModelConfig(), token_cfg=TokenConfig(), seed=-1):
    with open(path, "wb") as fh:
        fh.write(serialize_params(params, model_cfg, token_cfg, seed))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return deserialize_checkpoint(fh.read())


# ---------------------------------------------------------------- datasets


class DatasetHeader:
    def __init__(self, geometry, count, seed, fov, k_max, amp_range):
        self.geometry = geometry
        self.count = int(count)
        self.seed = int(seed)
        self.fov = tuple(float(v) for v in fov)
        self.k_max = int(k_max)
        self.amp_range = tuple(float(v) for v in amp_range)

    def pack(self):
        n = self.geometry.n_elements
        head = _D_HEADER.pack(DATASET_MAGIC, VERSION, 0, n, self.k_max, self.count, self.seed,
                              *self.fov, *self.amp_range)
        return head + np.asarray(self.geometry.spacings, dtype="<f8").tobytes()

    def record_size(self):
        return 8 * self.geometry.n_elements + 4 + 24 * self.k_max


def _pack_record(clean, targets, k_max):
    iq = np.empty(2 * clean.shape[0], dtype="<f4")
    iq[0::2] = clean.real
    iq[1::2] = clean.imag
    meta = np.zeros((k_max, 3), dtype="<f8")
    meta[:targets.k, 0] = targets.angles
    meta[:targets.k, 1] = targets.coefficients.real
    meta[:targets.k, 2] = targets.coefficients.imag
    return iq.tobytes() + struct.pack("<I", targets.k) + meta.tobytes()


def _records(header):
    for clean, targets in iter_dataset(header.seed, header.count, header.geometry, header.fov,
                                       header.k_max, header.amp_range):
        yield _pack_record(clean, targets, header.k_max)


def write_dataset(path, header):
    with open(path, "wb") as fh:
        fh.write(header.pack())
        for rec in _records(header):
            fh.write(rec)


def _read_header(blob):
    if len(blob) < _D_HEADER.size:
        raise FormatError("header", f"need {_D_HEADER.size} bytes, got {len(blob)}")
    magic, version, _, n, k_max, count, seed, f0, f1, a0, a1 = _D_HEADER.unpack_from(blob)
    if magic != DATASET_MAGIC:
        raise FormatError("magic", f"expected {DATASET_MAGIC!r}, got {magic!r}")
    if version != VERSION:
        raise FormatError("version", f"unsupported version {version}")
    if n == 0 or k_max == 0:
        raise FormatError("header", "N and k_max must be positive")
    end = _D_HEADER.size + 8 * n
    if len(blob) < end:
        raise FormatError("spacings", "truncated geometry block")
    spacings = np.frombuffer(blob, dtype="<f8", count=n, offset=_D_HEADER.size)
    try:
        geometry = ArrayGeometry(spacings.copy())
    except ValueError as exc:
        raise FormatError("spacings", str(exc)) from None
    return DatasetHeader(geometry, count, seed, (f0, f1), k_max, (a0, a1)), end


def read_dataset(path):
    """Return ``(header, clean, targets)`` from a dataset container."""
    with open(path, "rb") as fh:
        blob = fh.read()
    header, off = _read_header(blob)
    n, k_max, rs = header.geometry.n_elements, header.k_max, header.record_size()
    if len(blob) - off != header.count * rs:
        raise FormatError("records", f"expected {header.count} records of {rs} bytes, "
                                     f"found {len(blob) - off} bytes")
    clean = np.empty((header.count, n), dtype=np.complex128)
    targets = []
    for i in range(header.count):
        base = off + i * rs
        iq = np.frombuffer(blob, dtype="<f4", count=2 * n, offset=base)
        clean[i] = iq[0::2] + 1j * iq[1::2].astype(np.float64)
        (k,) = struct.unpack_from("<I", blob, base + 8 * n)
        if not 1 <= k <= k_max:
            raise FormatError(f"record[{i}].K", f"K={k} outside [1, {k_max}]")
        meta = np.frombuffer(blob, dtype="<f8", count=3 * k_max, offset=base + 8 * n + 4)
        meta = meta.reshape(k_max, 3)[:k]
        targets.append(TargetSet(meta[:, 0].copy(), meta[:, 1] + 1j * meta[:, 2]))
    return header, clean, targets


def verify_dataset(path):
    """True when the stored records equal a regeneration from the header seed."""
    with open(path, "rb") as fh:
        blob = fh.read()
    header, off = _read_header(blob)
    expected = b"".join(_records(header))
    return blob[off:] == expected
