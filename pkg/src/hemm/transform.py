"""Plaintext mathematics of diagonal-encoded matrix multiplication.

Matrices are flattened column-major into ``S = N/2`` slots.  Each of the four
transforms (sigma, tau, epsilon^k, omega^k) is a 0/1 matrix acting on these
flattened vectors; it is applied homomorphically through its cyclic
diagonals ``u_z[i] = U[i, (i + z) mod S]`` of the zero-padded ``S x S``
embedding, so that ``U v = sum_z u_z * rot(v, z)``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

KINDS = ("sigma", "tau", "epsilon", "omega")


@dataclass(frozen=True)
class MatrixDims:
    """Shapes of ``A (m x l)`` and ``B (l x n)``."""

    m: int
    l: int
    n: int

    def __post_init__(self):
        if min(self.m, self.l, self.n) < 1:
            raise ValueError(f"dimensions must be positive: {self}")

    @classmethod
    def parse(cls, text: str) -> "MatrixDims":
        parts = [int(x) for x in text.replace("-", ",").split(",") if x.strip()]
        if len(parts) != 3:
            raise ValueError(f"expected m,l,n, got {text!r}")
        return cls(*parts)

    @property
    def label(self) -> str:
        return f"{self.m}-{self.l}-{self.n}"

    def check_slots(self, slots: int):
        need = max(self.m * self.l, self.l * self.n, self.m * self.n)
        if need > slots:
            raise ValueError(
                f"{self.label} exceeds slot capacity: needs {need} slots, ring offers "
                f"{slots}; select_degree gives N={select_degree(self)}"
            )


@dataclass(frozen=True)
class TransformKind:
    name: str
    k: int = 0

    def __post_init__(self):
        if self.name not in KINDS:
            raise ValueError(f"unknown transform {self.name!r}")
        if self.name in ("sigma", "tau") and self.k:
            raise ValueError(f"{self.name} takes no shift")

    def check(self, dims: MatrixDims):
        if self.name in ("epsilon", "omega") and not 0 <= self.k < dims.l:
            raise ValueError(f"shift k={self.k} outside [0, {dims.l})")

    def __str__(self):
        return self.name if self.name in ("sigma", "tau") else f"{self.name}^{self.k}"


SIGMA = TransformKind("sigma")
TAU = TransformKind("tau")


def epsilon(k: int) -> TransformKind:
    return TransformKind("epsilon", k)


def omega(k: int) -> TransformKind:
    return TransformKind("omega", k)


# ---------------------------------------------------------------------------
# flattening and degree selection


def flatten(matrix, slots: int) -> np.ndarray:
    matrix = np.asarray(matrix)
    if matrix.size > slots:
        raise ValueError(f"{matrix.shape} matrix does not fit in {slots} slots")
    out = np.zeros(slots, dtype=matrix.dtype if matrix.dtype != object else object)
    out[: matrix.size] = matrix.flatten(order="F")
    return out


def unflatten(vector, rows: int, cols: int) -> np.ndarray:
    return np.asarray(vector)[: rows * cols].reshape((rows, cols), order="F")


def _pow2_ceil(x: int) -> int:
    return 1 << max(0, math.ceil(math.log2(x)))


def select_degree(dims: MatrixDims) -> int:
    """Smallest ring degree whose slots hold both flattened inputs."""
    return max(_pow2_ceil(2 * dims.m * dims.l), _pow2_ceil(2 * dims.n * dims.l))


def runtime_degree(dims: MatrixDims) -> int:
    """Ring degree that also fits the ``m x n`` product (``select_degree`` ignores it)."""
    return max(select_degree(dims), _pow2_ceil(2 * dims.m * dims.n))


# ---------------------------------------------------------------------------
# transformation matrices


def transform_entries(kind: TransformKind, dims: MatrixDims):
    """Row and column indices of the ones, plus the (rows, cols) shape."""
    kind.check(dims)
    m, l, n, k = dims.m, dims.l, dims.n, kind.k
    if kind.name == "sigma":
        i, j = np.meshgrid(np.arange(m), np.arange(l), indexing="ij")
        rows, cols = i + j * m, i + ((i + j) % l) * m
        shape = (m * l, m * l)
    elif kind.name == "tau":
        i, j = np.meshgrid(np.arange(l), np.arange(n), indexing="ij")
        rows, cols = i + j * l, (i + j) % l + j * l
        shape = (l * n, l * n)
    elif kind.name == "epsilon":
        rows = np.arange(m * n)
        cols = (k * m + rows) % (m * l)
        shape = (m * n, m * l)
    else:
        rows = np.arange(m * n)
        cols = (k + rows % m) % l + (rows // m) * l
        shape = (m * n, l * n)
    return rows.ravel(), cols.ravel(), shape


def build_dense(kind: TransformKind, dims: MatrixDims, slots: int) -> np.ndarray:
    """The 0/1 transform embedded top-left in an ``S x S`` zero matrix."""
    rows, cols, shape = transform_entries(kind, dims)
    if max(shape) > slots:
        raise ValueError(f"{kind} for {dims.label} needs {max(shape)} slots")
    dense = np.zeros((slots, slots), dtype=np.int64)
    dense[rows, cols] = 1
    return dense


def diag_count(kind: TransformKind, dims: MatrixDims) -> int:
    """Published closed-form number of nonzero diagonals."""
    m, l, n = dims.m, dims.l, dims.n
    if kind.name == "sigma":
        return 2 * min(m, l) - 1
    if kind.name == "tau":
        return 2 * min(n, l) - 1
    if kind.name == "epsilon":
        return n // l + 1
    return 2 if m == l else n * (m // l + 2)


# ---------------------------------------------------------------------------
# diagonal sets


@dataclass(frozen=True, eq=False)
class DiagonalSet:
    """Nonzero cyclic diagonals ``(z, u_z)`` of a padded transform."""

    slots: int
    kind: TransformKind
    dims: MatrixDims
    diagonals: tuple[tuple[int, np.ndarray], ...]
    _encoded: dict = field(default_factory=dict, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self):
        if not self.diagonals:
            raise ValueError("diagonal set is empty")
        zs = [z for z, _ in self.diagonals]
        if zs != sorted(set(zs)):
            raise ValueError("diagonal indices must be strictly increasing")

    @property
    def indices(self) -> list[int]:
        return [z for z, _ in self.diagonals]

    def __len__(self):
        return len(self.diagonals)

    def apply(self, vector) -> np.ndarray:
        """Plaintext evaluation of ``sum_z u_z * rot(v, z)``."""
        vector = np.asarray(vector)
        acc = np.zeros(self.slots, dtype=np.result_type(vector, np.int64))
        for z, mask in self.diagonals:
            acc = acc + mask * np.roll(vector, -z)
        return acc

    def encoded(self, chain, level: int, scale: float, extended: bool = False):
        """Masks as plaintexts, cached per (chain, level, scale, basis)."""
        from .ckks import encode

        key = (id(chain), level, float(scale), extended)
        hit = self._encoded.get(key)
        if hit is not None and hit[0] is chain:
            return hit[1]
        if chain.ring_degree // 2 != self.slots:
            raise ValueError(f"chain has {chain.ring_degree // 2} slots, masks have {self.slots}")
        pts = [encode(mask.astype(float), scale, chain, level, extended) for _, mask in self.diagonals]
        with self._lock:
            self._encoded[key] = (chain, pts)
        return pts


def extract_diagonals(
    kind: TransformKind,
    dims: MatrixDims,
    slots: int,
    chain=None,
    scale: float | None = None,
    level: int | None = None,
) -> DiagonalSet:
    """Cyclic diagonals of the padded transform; optionally pre-encode the masks."""
    rows, cols, shape = transform_entries(kind, dims)
    if max(shape) > slots:
        raise ValueError(f"{kind} for {dims.label} needs {max(shape)} slots, have {slots}")
    z = (cols - rows) % slots
    diagonals = []
    for zi in np.unique(z):
        mask = np.zeros(slots, dtype=np.int64)
        mask[rows[z == zi]] = 1
        diagonals.append((int(zi), mask))
    dset = DiagonalSet(slots, kind, dims, tuple(diagonals))
    if chain is not None:
        dset.encoded(chain, chain.L if level is None else level, scale or 1.0)
    return dset


def matmul_kinds(dims: MatrixDims) -> list[TransformKind]:
    """Every transform used by one product: sigma, tau, then epsilon^k/omega^k."""
    kinds = [SIGMA, TAU]
    for k in range(dims.l):
        kinds += [epsilon(k), omega(k)]
    return kinds


def shape_type(dims: MatrixDims) -> str:
    """Benchmark shape class: I (n smallest), II (l), III (m), IV (square)."""
    m, l, n = dims.m, dims.l, dims.n
    if m == l == n:
        return "IV"
    low = min(m, l, n)
    if n == low:
        return "I"
    if l == low:
        return "II"
    return "III"
