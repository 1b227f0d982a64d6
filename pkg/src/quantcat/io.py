"""Artifact serialization: JSON with fixed float formatting, binary state and
operator containers, CSV grids."""
from __future__ import annotations

import json
import math
import struct
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .torus import QuantumTorus, TorusOperator, TorusState

__all__ = ["to_jsonable", "dumps", "write_json", "read_json", "write_state",
           "read_state", "write_operator", "read_operator", "write_grid_csv",
           "read_grid_csv"]

STATE_MAGIC = b"TQST"
OPERATOR_MAGIC = b"TQOP"


class _Float17(float):
    def __repr__(self):
        if math.isnan(self) or math.isinf(self):
            return json.dumps(float(self))
        return format(float(self), ".17g")


def to_jsonable(obj):
    """Recursively convert numpy containers and scalars to JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if hasattr(obj, "as_dict"):
        return to_jsonable(obj.as_dict())
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _fmt(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_fmt(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_fmt(v, indent, level) for v in obj) + "]"
        items = [pad + _fmt(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, float):
        return repr(_Float17(obj))
    return json.dumps(obj)


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON; floats printed with 17 significant digits."""
    return _fmt(to_jsonable(obj), indent, 0) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# binary containers: magic, uint32 d, uint32 N, d*2 float64 kappa,
# then float64 (re, im) pairs, all little-endian

def _header(magic, qt: QuantumTorus) -> bytes:
    return magic + struct.pack("<II", qt.d, qt.N) + np.asarray(qt.kappa, "<f8").tobytes()


def _parse_header(buf: bytes, magic: bytes):
    if buf[:4] != magic:
        raise ValidationError(f"bad magic {buf[:4]!r}, expected {magic!r}")
    d, N = struct.unpack("<II", buf[4:12])
    kappa = np.frombuffer(buf[12:12 + 16 * d], "<f8")
    return QuantumTorus(N, d, kappa), 12 + 16 * d


def _pack_complex(a: np.ndarray) -> bytes:
    out = np.empty(a.size * 2, "<f8")
    out[0::2] = a.real.ravel()
    out[1::2] = a.imag.ravel()
    return out.tobytes()


def _unpack_complex(buf: bytes, count: int) -> np.ndarray:
    raw = np.frombuffer(buf, "<f8", count=2 * count)
    return raw[0::2] + 1j * raw[1::2]


def write_state(path, state: TorusState) -> Path:
    path = Path(path)
    path.write_bytes(_header(STATE_MAGIC, state.context) + _pack_complex(state.coeffs))
    return path


def read_state(path) -> TorusState:
    buf = Path(path).read_bytes()
    qt, off = _parse_header(buf, STATE_MAGIC)
    return TorusState(_unpack_complex(buf[off:], qt.dim), qt)


def write_operator(path, op: TorusOperator) -> Path:
    path = Path(path)
    path.write_bytes(_header(OPERATOR_MAGIC, op.context) + _pack_complex(op.matrix))
    return path


def read_operator(path) -> TorusOperator:
    buf = Path(path).read_bytes()
    qt, off = _parse_header(buf, OPERATOR_MAGIC)
    n = qt.dim
    return TorusOperator(_unpack_complex(buf[off:], n * n).reshape(n, n), qt)


# ---------------------------------------------------------------------------
# CSV grids

def write_grid_csv(path, grid: np.ndarray, d: int, N: int) -> Path:
    """Row-major grid with a leading header line 'd,N,resolution'."""
    path = Path(path)
    G = grid.shape[0]
    flat = np.asarray(grid, float).reshape(-1, G)
    lines = ["d,N,resolution", f"{d},{N},{G}"]
    lines += [",".join(format(v, ".17g") for v in row) for row in flat]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_grid_csv(path):
    lines = Path(path).read_text().splitlines()
    d, N, G = (int(v) for v in lines[1].split(","))
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]])
    return data.reshape((G,) * (2 * d)), d, N
