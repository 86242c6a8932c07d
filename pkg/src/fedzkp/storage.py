"""File formats for credentials, public inputs, aggregates, watermarks,
model checkpoints and training history.

Binary files share a layout: the 7-byte magic ``FEDZKP1``, a kind byte,
a fixed little-endian header, then raw payload bytes.  Bit payloads use
the gf2 packing (8 bits per byte, matrices row-major).  Float payloads
are flat little-endian float64.

Credentials are secrets; they get their own file kind and never appear
inside public-input, aggregate or watermark files.  The embedding
directions are not stored at all: the config file keeps the RNG seed
they were drawn from, which is smaller and tamper-evident in one value.
"""
from __future__ import annotations

import csv
import json
import struct
from fractions import Fraction
from pathlib import Path
from typing import Union

import numpy as np

from .gf2 import BitMatrix, BitVec
from .lpn import Credential, PublicInput, XlpnParams
from .model import EmbeddingConfig, ModelState, make_embedding
from .watermark import AggregatedInput, HashWatermark

MAGIC = b"FEDZKP1"

KIND_CREDENTIAL = 1
KIND_PUBLIC_INPUT = 2
KIND_AGGREGATE = 3
KIND_CHECKPOINT = 4

_PARAMS = struct.Struct("<IIQQI")  # m, l, tau numerator/denominator, w

PathLike = Union[str, Path]


def _vec_bytes(n: int) -> int:
    return (n + 7) // 8


def _mat_bytes(m: int, l: int) -> int:
    return (m * l + 7) // 8


def _write(path: PathLike, payload: bytes):
    Path(path).write_bytes(payload)


def _read_kind(path: PathLike, kind: int) -> memoryview:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 1 or data[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a FEDZKP file")
    if data[len(MAGIC)] != kind:
        raise ValueError(f"{path}: wrong file kind {data[len(MAGIC)]}, expected {kind}")
    return memoryview(data)[len(MAGIC) + 1:]


def _pack_params(params: XlpnParams) -> bytes:
    return _PARAMS.pack(params.m, params.l, params.tau.numerator,
                        params.tau.denominator, params.w)


def _unpack_params(view: memoryview) -> tuple:
    m, l, num, den, w = _PARAMS.unpack_from(view)
    params = XlpnParams(m, l, Fraction(num, den))
    if params.w != w:
        raise ValueError("stored weight disagrees with stored noise rate")
    return params, view[_PARAMS.size:]


def _expect(view: memoryview, size: int, what: str) -> tuple:
    if len(view) < size:
        raise ValueError(f"truncated file: missing {what}")
    return bytes(view[:size]), view[size:]


def _done(view: memoryview, path: PathLike):
    if len(view):
        raise ValueError(f"{path}: {len(view)} trailing bytes")


def save_credential(path: PathLike, cred: Credential, params: XlpnParams):
    body = cred.s.to_bytes() + cred.e.to_bytes()
    _write(path, MAGIC + bytes([KIND_CREDENTIAL]) + _pack_params(params) + body)


def load_credential(path: PathLike) -> tuple:
    view = _read_kind(path, KIND_CREDENTIAL)
    params, view = _unpack_params(view)
    s_raw, view = _expect(view, _vec_bytes(params.l), "secret")
    e_raw, view = _expect(view, _vec_bytes(params.m), "noise")
    _done(view, path)
    cred = Credential(s=BitVec.from_bytes(s_raw, params.l),
                      e=BitVec.from_bytes(e_raw, params.m))
    if cred.e.weight() != params.w:
        raise ValueError("stored noise vector has the wrong weight")
    return cred, params


def save_public_input(path: PathLike, pub: PublicInput, params: XlpnParams):
    body = pub.A.to_bytes() + pub.y.to_bytes()
    _write(path, MAGIC + bytes([KIND_PUBLIC_INPUT]) + _pack_params(params) + body)


def load_public_input(path: PathLike) -> tuple:
    view = _read_kind(path, KIND_PUBLIC_INPUT)
    params, view = _unpack_params(view)
    a_raw, view = _expect(view, _mat_bytes(params.m, params.l), "matrix")
    y_raw, view = _expect(view, _vec_bytes(params.m), "image vector")
    _done(view, path)
    pub = PublicInput(A=BitMatrix.from_bytes(a_raw, params.m, params.l),
                      y=BitVec.from_bytes(y_raw, params.m))
    return pub, params


def save_aggregate(path: PathLike, agg: AggregatedInput, params: XlpnParams):
    if (agg.m, agg.l) != (params.m, params.l):
        raise ValueError("aggregate dimensions disagree with the parameters")
    chunks = [MAGIC, bytes([KIND_AGGREGATE]), _pack_params(params),
              struct.pack("<I", len(agg.parts))]
    for pub in agg.parts:
        chunks.append(pub.A.to_bytes())
        chunks.append(pub.y.to_bytes())
    _write(path, b"".join(chunks))


def load_aggregate(path: PathLike) -> tuple:
    view = _read_kind(path, KIND_AGGREGATE)
    params, view = _unpack_params(view)
    raw, view = _expect(view, 4, "client count")
    (count,) = struct.unpack("<I", raw)
    if count < 1:
        raise ValueError("aggregate holds no client inputs")
    parts = []
    for _ in range(count):
        a_raw, view = _expect(view, _mat_bytes(params.m, params.l), "matrix")
        y_raw, view = _expect(view, _vec_bytes(params.m), "image vector")
        parts.append(PublicInput(A=BitMatrix.from_bytes(a_raw, params.m, params.l),
                                 y=BitVec.from_bytes(y_raw, params.m)))
    _done(view, path)
    return AggregatedInput(parts=tuple(parts), m=params.m, l=params.l, K=count), params


def save_watermark(path: PathLike, wm: HashWatermark):
    doc = {"n": wm.n, "h": wm.h.to_bytes().hex()}
    Path(path).write_text(json.dumps(doc) + "\n")


def load_watermark(path: PathLike) -> HashWatermark:
    doc = json.loads(Path(path).read_text())
    n = int(doc["n"])
    h = BitVec.from_bytes(bytes.fromhex(doc["h"]), n)
    return HashWatermark(h=h, n=n)


def save_checkpoint(path: PathLike, state: ModelState):
    head = struct.pack("<IIIQQ", state.d_in, state.omega, state.classes,
                       state.theta.size, state.W_gamma.size)
    body = (np.ascontiguousarray(state.theta, dtype="<f8").tobytes()
            + np.ascontiguousarray(state.W_gamma, dtype="<f8").tobytes())
    _write(path, MAGIC + bytes([KIND_CHECKPOINT]) + head + body)


def load_checkpoint(path: PathLike) -> ModelState:
    view = _read_kind(path, KIND_CHECKPOINT)
    raw, view = _expect(view, struct.calcsize("<IIIQQ"), "model header")
    d_in, omega, classes, t_len, g_len = struct.unpack("<IIIQQ", raw)
    if g_len != omega:
        raise ValueError("scale vector length disagrees with declared width")
    t_raw, view = _expect(view, 8 * t_len, "main weights")
    g_raw, view = _expect(view, 8 * g_len, "scale vector")
    _done(view, path)
    theta = np.frombuffer(t_raw, dtype="<f8").astype(np.float64)
    gamma = np.frombuffer(g_raw, dtype="<f8").astype(np.float64)
    return ModelState(d_in=d_in, omega=omega, classes=classes,
                      theta=theta, W_gamma=gamma)


def save_embedding_config(path: PathLike, omega: int, n: int, seed: int,
                          lam: float, mu_hinge: float):
    """The embedding directions regrow from the seed, so only it is kept."""
    doc = {"omega": omega, "n": n, "seed": seed, "lam": lam, "mu_hinge": mu_hinge}
    Path(path).write_text(json.dumps(doc) + "\n")


def load_embedding_config(path: PathLike) -> EmbeddingConfig:
    doc = json.loads(Path(path).read_text())
    rng = np.random.default_rng(int(doc["seed"]))
    return make_embedding(int(doc["omega"]), int(doc["n"]), rng,
                          lam=float(doc["lam"]), mu_hinge=float(doc["mu_hinge"]))


def save_history(path: PathLike, history) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "r", "accuracy"])
        for rec in history:
            writer.writerow([rec.round, f"{rec.report.r:.6f}", f"{rec.accuracy:.6f}"])


def load_history(path: PathLike) -> list:
    """Rows come back as (round, r, accuracy) tuples, not full records."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["round", "r", "accuracy"]:
            raise ValueError("unrecognized history header")
        return [(int(a), float(b), float(c)) for a, b, c in reader]
