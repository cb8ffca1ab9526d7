"""Seeded random nonlinear feature maps.

Weights come from numpy's ``Generator`` on the Philox 4x64 counter-based bit
generator; normals use numpy's ziggurat ``standard_normal``. The stream is
consumed column by column (feature k outer, input coordinate i inner), so the
first P1 columns of a P-column draw equal a P1-column draw with the same seed.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

ACTIVATIONS = ("tanh", "relu")

# header: 2-byte magic, uint16 d, uint32 P, uint64 seed (little endian)
_DUMP_MAGIC = b"RW"
_DUMP_HEADER = struct.Struct("<2sHIQ")


def make_rng(seed: int) -> np.random.Generator:
    """Generator used for every seeded draw in the package."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return np.random.Generator(np.random.Philox(seed))


def activate(u: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        return np.tanh(u)
    if activation == "relu":
        return np.maximum(u, 0.0)
    raise ValueError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")


@dataclass(frozen=True)
class RandomFeatureMap:
    W: np.ndarray
    activation: str
    seed: int

    @property
    def d(self) -> int:
        return self.W.shape[0]

    @property
    def P(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class SignalMatrix:
    values: np.ndarray
    split_index: int
    row_dates: list | None = None
    column_names: list | None = field(default=None, compare=False)

    def __post_init__(self):
        v = self.values
        if v.ndim != 2:
            raise ValueError("values must be a 2-d array")
        if not 0 < self.split_index < v.shape[0]:
            raise ValueError(f"split_index {self.split_index} outside (0, {v.shape[0]})")
        if not np.isfinite(v).all():
            raise ValueError("signal matrix has non-finite entries")
        if self.row_dates is not None and len(self.row_dates) != v.shape[0]:
            raise ValueError("row_dates length does not match rows")

    @property
    def P(self) -> int:
        return self.values.shape[1]

    @property
    def train(self) -> np.ndarray:
        return self.values[: self.split_index]

    @property
    def test(self) -> np.ndarray:
        return self.values[self.split_index:]


def generate_weights(d: int, P: int, seed: int, activation: str = "tanh") -> RandomFeatureMap:
    if d < 1 or P < 1:
        raise ValueError("d and P must be positive")
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    rng = make_rng(seed)
    W = rng.standard_normal(P * d).reshape(P, d).T.copy()
    return RandomFeatureMap(W=W, activation=activation, seed=int(seed))


def random_features(X, fmap: RandomFeatureMap, split_index: int,
                    row_dates: Sequence | None = None) -> SignalMatrix:
    """S[t, k] = g(<W_k, X_t>)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != fmap.d:
        raise ValueError(f"X must have {fmap.d} columns, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("X has non-finite entries")
    S = activate(X @ fmap.W, fmap.activation)
    return SignalMatrix(S, split_index, None if row_dates is None else list(row_dates))


def slice_features(S: SignalMatrix, P1: int) -> SignalMatrix:
    if not 1 <= P1 <= S.P:
        raise ValueError(f"P1={P1} outside [1, {S.P}]")
    names = None if S.column_names is None else S.column_names[:P1]
    return SignalMatrix(S.values[:, :P1], S.split_index, S.row_dates, names)


def dump_weights(fmap: RandomFeatureMap, path) -> None:
    """Write W as float64 little endian, feature-major, after a 16-byte header."""
    if fmap.d > 0xFFFF:
        raise ValueError("d too large for the dump header")
    with Path(path).open("wb") as fh:
        fh.write(_DUMP_HEADER.pack(_DUMP_MAGIC, fmap.d, fmap.P, fmap.seed))
        fh.write(np.ascontiguousarray(fmap.W.T, dtype="<f8").tobytes())


def load_weights(path, activation: str = "tanh") -> RandomFeatureMap:
    raw = Path(path).read_bytes()
    if len(raw) < _DUMP_HEADER.size:
        raise ValueError("file too short for header")
    magic, d, P, seed = _DUMP_HEADER.unpack_from(raw)
    if magic != _DUMP_MAGIC:
        raise ValueError("bad magic")
    body = np.frombuffer(raw, dtype="<f8", offset=_DUMP_HEADER.size)
    if body.size != d * P:
        raise ValueError(f"expected {d * P} weights, found {body.size}")
    return RandomFeatureMap(W=body.reshape(P, d).T.astype(float), activation=activation, seed=seed)
