"""On-disk formats: complex tensors (CXT1), model checkpoints (LSN1) and
``key=value`` text manifests.

All numbers are little-endian; floats are IEEE float64.
"""
from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .encoding import EncodingOperator, SamplingMask
from .exceptions import DataError, LsNetError
from .neural import KERNEL, CnnBlockParams, Conv3dLayer, _plan_layers
from .phantom import Sample
from .training import AdamState, TrainRecord
from .unrolled import LsNetParams

__all__ = [
    "CXT_MAGIC",
    "CKPT_MAGIC",
    "CKPT_VERSION",
    "write_cxt",
    "read_cxt",
    "encode_cxt",
    "decode_cxt",
    "write_checkpoint",
    "read_checkpoint",
    "encode_checkpoint",
    "decode_checkpoint",
    "write_manifest",
    "read_manifest",
    "write_operator",
    "read_operator",
    "write_sample",
    "read_sample",
    "write_train_state",
    "read_train_state",
]

CXT_MAGIC = b"CXT1"
CKPT_MAGIC = b"LSN1"
CKPT_VERSION = 1

_F64 = np.dtype("<f8")


def encode_cxt(t) -> bytes:
    t = np.asarray(t)
    if not np.iscomplexobj(t):
        t = t.astype(np.float64)
    t = np.array(t, dtype=np.complex128, order="C")
    head = CXT_MAGIC + struct.pack("<I", t.ndim) + struct.pack(f"<{t.ndim}Q", *t.shape)
    payload = np.empty(t.shape + (2,), dtype=_F64)
    payload[..., 0] = t.real
    payload[..., 1] = t.imag
    return head + payload.tobytes()


def decode_cxt(buf: bytes, source="<bytes>") -> np.ndarray:
    if len(buf) < 8 or buf[:4] != CXT_MAGIC:
        raise DataError(f"{source}: not a CXT1 file")
    (ndim,) = struct.unpack_from("<I", buf, 4)
    off = 8 + 8 * ndim
    if len(buf) < off:
        raise DataError(f"{source}: truncated header")
    shape = struct.unpack_from(f"<{ndim}Q", buf, 8)
    n = int(np.prod(shape, dtype=np.int64)) if ndim else 1
    if len(buf) - off != 16 * n:
        raise DataError(f"{source}: payload has {len(buf) - off} bytes, header implies {16 * n}")
    pairs = np.frombuffer(buf, dtype=_F64, count=2 * n, offset=off).reshape(tuple(shape) + (2,))
    out = np.empty(tuple(shape), dtype=np.complex128)
    out.real = pairs[..., 0]
    out.imag = pairs[..., 1]
    return out


def write_cxt(path, t) -> None:
    Path(path).write_bytes(encode_cxt(t))


def read_cxt(path) -> np.ndarray:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    return decode_cxt(buf, str(path))


def encode_checkpoint(params: LsNetParams) -> bytes:
    """Header (magic, version, n_iter, plan, alpha), per-block parameters,
    then a CRC32 over every preceding byte."""
    plan = params.plan
    parts = [
        CKPT_MAGIC,
        struct.pack("<II", CKPT_VERSION, params.n_iter),
        struct.pack("<I", len(plan)),
        struct.pack(f"<{len(plan)}I", *plan),
        struct.pack("<d", params.alpha),
    ]
    for k, cnn in enumerate(params.cnns):
        if cnn.plan != plan:
            raise DataError(f"block {k} has plan {cnn.plan}, expected {plan}")
        parts.append(struct.pack("<dd", params.betas[k], params.gammas[k]))
        for a in cnn.arrays():
            parts.append(np.ascontiguousarray(a, dtype=_F64).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def decode_checkpoint(buf: bytes, source="<bytes>") -> LsNetParams:
    if len(buf) < 4 or buf[:4] != CKPT_MAGIC:
        raise DataError(f"{source}: not an LSN1 checkpoint")
    if len(buf) < 20:
        raise DataError(f"{source}: truncated checkpoint")
    body, (crc,) = buf[:-4], struct.unpack("<I", buf[-4:])
    if zlib.crc32(body) != crc:
        raise DataError(f"{source}: CRC mismatch, checkpoint is corrupted")
    version, n_iter, n_plan = struct.unpack_from("<III", body, 4)
    if version != CKPT_VERSION:
        raise DataError(f"{source}: unsupported checkpoint version {version}")
    off = 16
    plan = struct.unpack_from(f"<{n_plan}I", body, off)
    off += 4 * n_plan
    (alpha,) = struct.unpack_from("<d", body, off)
    off += 8
    try:
        layer_specs = _plan_layers(plan)
    except ValueError as e:
        raise DataError(f"{source}: {e}") from e
    per_block = 2 + sum(co * ci * KERNEL**3 + co for ci, co, _ in layer_specs)
    if len(body) - off != 8 * per_block * n_iter or n_iter < 1:
        raise DataError(f"{source}: payload length does not match plan {plan} x {n_iter} blocks")
    flat = np.frombuffer(body, dtype=_F64, offset=off)
    pos = 0
    betas, gammas, cnns = [], [], []
    for _ in range(n_iter):
        betas.append(flat[pos])
        gammas.append(flat[pos + 1])
        pos += 2
        layers = []
        for ci, co, act in layer_specs:
            nw = co * ci * KERNEL**3
            w = flat[pos : pos + nw].reshape(co, ci, KERNEL, KERNEL, KERNEL).copy()
            b = flat[pos + nw : pos + nw + co].copy()
            pos += nw + co
            layers.append(Conv3dLayer(w, b, act))
        cnns.append(CnnBlockParams(layers, alpha))
    return LsNetParams(np.array(betas), np.array(gammas), cnns)


def write_checkpoint(path, params: LsNetParams) -> None:
    Path(path).write_bytes(encode_checkpoint(params))


def read_checkpoint(path) -> LsNetParams:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    return decode_checkpoint(buf, str(path))


def write_manifest(path, entries: dict) -> None:
    lines = []
    for k, v in entries.items():
        if "=" in str(k) or "\n" in f"{k}{v}":
            raise DataError(f"manifest entry {k!r} cannot be written as key=value")
        lines.append(f"{k}={v}")
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_manifest(path) -> dict:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    out = {}
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{i}: expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def write_operator(directory, op: EncodingOperator, extra: dict | None = None) -> Path:
    """Write ``mask.cxt``, optional ``sens.cxt`` and an ``op.manifest``
    describing them; returns the manifest path."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    nx, ny, nt = op.image_shape
    write_cxt(d / "mask.cxt", op.mask.pattern)
    entries = {
        "nx": nx,
        "ny": ny,
        "nt": nt,
        "af": repr(op.mask.target_af),
        "realized_af": repr(op.mask.realized_af),
        "n_center": op.mask.n_center,
        "mask_seed": op.mask.seed,
        "n_coils": op.n_coils,
        "mask": "mask.cxt",
    }
    if op.sens is not None:
        write_cxt(d / "sens.cxt", op.sens)
        entries["sens"] = "sens.cxt"
    entries.update(extra or {})
    path = d / "op.manifest"
    write_manifest(path, entries)
    return path


def _field(m, key, conv, path):
    if key not in m:
        raise DataError(f"{path}: missing key {key!r}")
    try:
        return conv(m[key])
    except ValueError as e:
        raise DataError(f"{path}: bad value for {key!r}: {m[key]!r}") from e


def read_operator(manifest_path) -> EncodingOperator:
    path = Path(manifest_path)
    m = read_manifest(path)
    shape = tuple(_field(m, k, int, path) for k in ("nx", "ny", "nt"))
    pattern = read_cxt(path.parent / _field(m, "mask", str, path))
    if np.any(pattern.imag != 0):
        raise DataError(f"{path}: mask must be real")
    mask = SamplingMask(
        pattern.real.copy(),
        _field(m, "af", float, path),
        _field(m, "n_center", int, path),
        _field(m, "mask_seed", int, path),
    )
    sens = read_cxt(path.parent / m["sens"]) if "sens" in m else None
    try:
        return EncodingOperator(mask, shape, sens)
    except LsNetError as e:
        raise DataError(f"{path}: {e}") from e


def write_sample(directory, sample: Sample) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    extra = {}
    if sample.spec is not None:
        extra["phantom_seed"] = sample.spec.seed
    write_operator(d, sample.op, extra)
    write_cxt(d / "x_ref.cxt", sample.x_ref)
    write_cxt(d / "y.cxt", sample.y)


def read_sample(directory) -> Sample:
    d = Path(directory)
    op = read_operator(d / "op.manifest")
    y = read_cxt(d / "y.cxt")
    x_ref = read_cxt(d / "x_ref.cxt")
    if y.shape != op.kspace_shape or x_ref.shape != tuple(op.image_shape):
        raise DataError(f"{d}: tensor shapes do not match the operator manifest")
    return Sample(y, op, x_ref)


def write_train_state(path, record: TrainRecord) -> None:
    """Optimizer moments and loss history, enough to resume training exactly."""
    arrays = {"epoch": np.array(record.epoch), "losses": np.array(record.losses, dtype=float),
              "lrs": np.array(record.lrs, dtype=float)}
    if record.adam is not None:
        arrays["t"] = np.array(record.adam.t)
        for i, (m, v) in enumerate(zip(record.adam.m, record.adam.v)):
            arrays[f"m{i}"] = m
            arrays[f"v{i}"] = v
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def read_train_state(path) -> TrainRecord:
    try:
        z = np.load(path)
    except (OSError, ValueError) as e:
        raise DataError(f"cannot read training state {path}: {e}") from e
    with z:
        record = TrainRecord(list(map(float, z["losses"])), list(map(float, z["lrs"])),
                             int(z["epoch"]))
        if "t" in z:
            n = sum(1 for k in z.files if k.startswith("m"))
            record.adam = AdamState([z[f"m{i}"].copy() for i in range(n)],
                                    [z[f"v{i}"].copy() for i in range(n)], int(z["t"]))
    return record
