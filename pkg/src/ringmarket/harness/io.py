"""CSV tables, binary checkpoints and file hashing."""

import csv
import hashlib
import io
import json
import math
import struct
from pathlib import Path

import numpy as np

from ..market import MarketState
from ..params import ModelParams

INT_COLUMNS = {"t", "births", "deaths", "sales", "overhead_count", "distinct_labels",
               "label", "entry", "count", "sweep_index", "run_index", "n", "seed"}

REQUIRED_TIMESERIES = ("t", "live_fraction", "mean_price", "mean_capital",
                       "unsatisfied_demand", "births", "deaths", "revenue", "overheads")


class SchemaError(ValueError):
    def __init__(self, path, column, message="missing column"):
        super().__init__(f"{path}: {message} {column!r}")
        self.column = column


def fmt(value, column=None) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if column in INT_COLUMNS or isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if math.isnan(x):
        return "nan"
    return repr(x)


def write_table(path, columns, rows):
    """UTF-8 CSV with one header line; floats use the shortest round-trip repr."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v, c) for c, v in zip(columns, row)])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_table(path, required=()):
    """Read a CSV into ``{column: np.ndarray}``; numeric columns become floats."""
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as f:
        r = csv.reader(f)
        try:
            header = next(r)
        except StopIteration:
            raise SchemaError(path, required[0] if required else "", "empty file, expected") from None
        rows = list(r)
    for col in required:
        if col not in header:
            raise SchemaError(path, col)
    out = {}
    for j, col in enumerate(header):
        vals = [row[j] for row in rows]
        try:
            out[col] = np.array([float(v) if v != "" else np.nan for v in vals])
        except ValueError:
            out[col] = np.array(vals, dtype=object)
    return out


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# Checkpoint layout, all little-endian:
#   b"BBSIM" | u16 version | u32 field count
#   per field: u16 name length | name (ascii) | u64 payload length | payload
# Fields, in order: params (UTF-8 JSON), t (u64), rng (4 x u64), live (u8[N]),
# price (f64[N]), capital (f64[N]), label (i64[N]), hist (f64[N*m], row major),
# hist_len (i64[N]), hist_next (i64[N]).
MAGIC = b"BBSIM"
VERSION = 1
_ARRAYS = (("rng", "<u8"), ("live", "u1"), ("price", "<f8"), ("capital", "<f8"),
           ("label", "<i8"), ("hist", "<f8"), ("hist_len", "<i8"), ("hist_next", "<i8"))


class CheckpointError(ValueError):
    pass


def _field(name: str, payload: bytes) -> bytes:
    raw = name.encode("ascii")
    return struct.pack("<H", len(raw)) + raw + struct.pack("<Q", len(payload)) + payload


def save_checkpoint(state: MarketState, path):
    fields = [_field("params", json.dumps(state.params.to_dict(), sort_keys=True).encode()),
              _field("t", struct.pack("<Q", state.t))]
    arrays = state.arrays()
    for name, dtype in _ARRAYS:
        fields.append(_field(name, np.ascontiguousarray(arrays[name], dtype=dtype).tobytes()))
    blob = MAGIC + struct.pack("<HI", VERSION, len(fields)) + b"".join(fields)
    Path(path).write_bytes(blob)


def load_checkpoint(path) -> MarketState:
    blob = Path(path).read_bytes()
    if blob[:5] != MAGIC:
        raise CheckpointError(f"{path}: not a BBSIM checkpoint")
    version, count = struct.unpack_from("<HI", blob, 5)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    pos = 11
    fields = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", blob, pos)
        name = blob[pos + 2:pos + 2 + nlen].decode("ascii")
        pos += 2 + nlen
        (plen,) = struct.unpack_from("<Q", blob, pos)
        pos += 8
        fields[name] = blob[pos:pos + plen]
        pos += plen
    params = ModelParams.from_dict(json.loads(fields["params"]))
    n, m = params.n_sellers, params.memory_length
    arr = {name: np.frombuffer(fields[name], dtype=dtype).copy() for name, dtype in _ARRAYS}
    state = MarketState(
        params, arr["live"], arr["price"], arr["capital"], arr["label"],
        arr["hist"].reshape(n, m), arr["hist_len"], arr["hist_next"],
        arr["rng"].astype(np.uint64), t=struct.unpack("<Q", fields["t"])[0])
    for name in ("live", "price", "capital", "label", "hist_len", "hist_next"):
        if getattr(state, name).shape != (n,):
            raise CheckpointError(f"{path}: field {name} has wrong length")
    return state
