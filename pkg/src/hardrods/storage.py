"""Snapshot CSV and binary checkpoints.

Checkpoint layout (little-endian, fixed width)::

    offset  type        field
    0       8s          magic b"HRODCKP1"
    8       u32         format version (1)
    12      u32         model id (0 barrier-pushed, 1 influx-killed, 2 jump-reset)
    16      f64 x 5     a, sigma2, epsilon, b, c          (NaN when unset)
    56      i64         n                                 (-1 when unset)
    64      f64         t
    72      i64 x 3     killed, injected, jumps
    96      f64 x 3     kill statistics
    120     u64 x 2     len(x), len(z)
    136     u32         has stream (0/1)
    140     u32         reserved
    144     stream block, present iff has stream:
              u64 base_seed, u64 stream_id, i64 normals_drawn, i64 uniforms_drawn
              per channel (normals, then uniforms):
                u64 x 4 counter, u64 x 2 key, u64 x 4 buffer,
                i64 buffer_pos, i64 has_uint32, u64 uinteger, u64 pending count
    then    f64 payload: x, z, pending normals, pending uniforms
"""
from __future__ import annotations

import csv
import io
import math
import struct

import numpy as np

from .analytics import DiffusionParams
from .particles import Model, SystemState
from .sde_kernel import RandomStream

__all__ = ["write_checkpoint", "read_checkpoint", "snapshot_rows", "write_snapshots"]

MAGIC = b"HRODCKP1"
VERSION = 1
_HEADER = struct.Struct("<8sII5dqd3q3d2QII")
_STREAM = struct.Struct("<QQqq")
_CHANNEL = struct.Struct("<4Q2Q4QqqQQ")


def _opt(v):
    return math.nan if v is None else float(v)


def _unopt(v):
    return None if math.isnan(v) else v


def _pack_channel(bitgen_state, pending_len):
    inner = bitgen_state["state"]
    return _CHANNEL.pack(*map(int, inner["counter"]), *map(int, inner["key"]),
                         *map(int, bitgen_state["buffer"]), int(bitgen_state["buffer_pos"]),
                         int(bitgen_state["has_uint32"]), int(bitgen_state["uinteger"]), pending_len)


def _unpack_channel(raw):
    f = _CHANNEL.unpack(raw)
    state = {
        "bit_generator": "Philox",
        "state": {"counter": np.array(f[0:4], dtype=np.uint64), "key": np.array(f[4:6], dtype=np.uint64)},
        "buffer": np.array(f[6:10], dtype=np.uint64),
        "buffer_pos": f[10],
        "has_uint32": f[11],
        "uinteger": f[12],
    }
    return state, f[13]


def checkpoint_bytes(state: SystemState, stream: RandomStream | None = None) -> bytes:
    p = state.params
    out = io.BytesIO()
    ks = np.asarray(state.kill_stats, dtype=float)
    out.write(_HEADER.pack(MAGIC, VERSION, state.model.value,
                           float(p.a), float(p.sigma2), float(p.epsilon), _opt(p.b), _opt(p.c),
                           -1 if p.n is None else int(p.n), float(state.t),
                           int(state.killed), int(state.injected), int(state.jumps),
                           *map(float, ks), state.x.shape[0], state.z.shape[0],
                           0 if stream is None else 1, 0))
    pending = []
    if stream is not None:
        st = stream.get_state()
        out.write(_STREAM.pack(st["base_seed"], st["stream_id"], st["normals_drawn"], st["uniforms_drawn"]))
        for key, pend in (("normal", "pending_normals"), ("uniform", "pending_uniforms")):
            out.write(_pack_channel(st[key], st[pend].shape[0]))
            pending.append(st[pend])
    for arr in (state.x, state.z, *pending):
        out.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return out.getvalue()


def write_checkpoint(path, state: SystemState, stream: RandomStream | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(state, stream))


def parse_checkpoint(data: bytes) -> tuple[SystemState, RandomStream | None]:
    if len(data) < _HEADER.size:
        raise ValueError("truncated checkpoint")
    h = _HEADER.unpack_from(data, 0)
    if h[0] != MAGIC:
        raise ValueError("not a hard-rod checkpoint")
    if h[1] != VERSION:
        raise ValueError(f"unsupported checkpoint version {h[1]}")
    model = Model(h[2])
    a, sigma2, eps, b, c = h[3:8]
    n = None if h[8] < 0 else h[8]
    params = DiffusionParams(a=a, sigma2=sigma2, epsilon=eps, c=_unopt(c), n=n, b=_unopt(b))
    t, killed, injected, jumps = h[9], h[10], h[11], h[12]
    kill_stats = np.array(h[13:16])
    nx, nz, has_stream = h[16], h[17], h[18]
    pos = _HEADER.size
    stream_state = None
    pend_lens = []
    if has_stream:
        seed, sid, nd, ud = _STREAM.unpack_from(data, pos)
        pos += _STREAM.size
        stream_state = {"base_seed": seed, "stream_id": sid, "normals_drawn": nd, "uniforms_drawn": ud}
        for key in ("normal", "uniform"):
            stream_state[key], k = _unpack_channel(data[pos:pos + _CHANNEL.size])
            pend_lens.append(k)
            pos += _CHANNEL.size
    arrays = []
    for k in (nx, nz, *pend_lens):
        end = pos + 8 * k
        if end > len(data):
            raise ValueError("truncated checkpoint payload")
        arrays.append(np.frombuffer(data[pos:end], dtype="<f8").astype(float))
        pos = end
    if pos != len(data):
        raise ValueError("trailing bytes in checkpoint")
    state = SystemState(t=t, model=model, z=arrays[1], x=arrays[0], params=params, killed=killed,
                        injected=injected, jumps=jumps, kill_stats=kill_stats)
    stream = None
    if stream_state is not None:
        stream_state["pending_normals"], stream_state["pending_uniforms"] = arrays[2], arrays[3]
        stream = RandomStream.from_state(stream_state)
    return state, stream


def read_checkpoint(path) -> tuple[SystemState, RandomStream | None]:
    with open(path, "rb") as fh:
        return parse_checkpoint(fh.read())


def snapshot_rows(state: SystemState):
    """Rows ``(t, k, center, left, right)`` with k counting rods from the left, starting at 1."""
    half = 0.5 * state.params.epsilon
    for k, x in enumerate(state.x, start=1):
        yield state.t, k, x, x - half, x + half


def write_snapshots(path, states) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "k", "center", "left", "right"])
        for s in states:
            for row in snapshot_rows(s):
                w.writerow([repr(float(row[0])), row[1], repr(float(row[2])),
                            repr(float(row[3])), repr(float(row[4]))])
