"""Word-level modular arithmetic, RNS prime chains and fast base conversion.

Residues are held one per 64-bit word in ``int64`` numpy arrays.  The
vectorised multiplier estimates the quotient in double precision and fixes
the remainder with wrapped 64-bit integer arithmetic, which is exact for
moduli below 2**56; wider moduli fall back to Python integers.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np
from sympy import isprime

MAX_MODULUS_BITS = 62
VECTOR_LIMIT = 1 << 56


@dataclass(frozen=True)
class PrimeModulus:
    """An NTT-friendly prime ``q = 1 (mod 2N)`` with its reduction constants."""

    q: int
    ring_degree: int
    two_n_root: int
    barrett_shift: int
    barrett_factor: int

    @classmethod
    def create(cls, q: int, ring_degree: int) -> "PrimeModulus":
        if q >= 1 << MAX_MODULUS_BITS:
            raise ValueError(f"modulus {q} exceeds {MAX_MODULUS_BITS} bits")
        if (q - 1) % (2 * ring_degree):
            raise ValueError(f"{q} is not 1 mod 2N for N={ring_degree}")
        if not isprime(q):
            raise ValueError(f"{q} is not prime")
        shift = q.bit_length()
        return cls(
            q=q,
            ring_degree=ring_degree,
            two_n_root=primitive_root_2n(q, ring_degree),
            barrett_shift=shift,
            barrett_factor=(1 << (2 * shift)) // q,
        )

    @property
    def bits(self) -> int:
        return self.q.bit_length()


def primitive_root_2n(q: int, n: int) -> int:
    """Smallest-generator primitive 2N-th root of unity modulo ``q``."""
    exponent = (q - 1) // (2 * n)
    for x in range(2, q):
        w = pow(x, exponent, q)
        # order divides 2N (a power of two); w^N = -1 pins it to exactly 2N
        if pow(w, n, q) == q - 1:
            return w
    raise ValueError(f"no primitive {2 * n}-th root modulo {q}")


def mod_mul(a: int, b: int, m: PrimeModulus) -> int:
    """Barrett-reduced ``a * b mod q`` for ``a, b < q``."""
    assert 0 <= a < m.q and 0 <= b < m.q, "operands must be reduced"
    t = a * b
    r = t - ((t * m.barrett_factor) >> (2 * m.barrett_shift)) * m.q
    while r >= m.q:
        r -= m.q
    return r


# ---------------------------------------------------------------------------
# vectorised kernels over int64 residue arrays


def mulmod(a: np.ndarray, b: np.ndarray | int, q: np.ndarray | int) -> np.ndarray:
    """Element-wise ``a * b mod q`` with broadcasting.

    Requires ``b < q`` and ``a < 2**56`` (``a`` need not be reduced).
    """
    q = np.asarray(q, dtype=np.int64)
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if int(q.max()) >= VECTOR_LIMIT:
        return _mulmod_exact(a, b, q)
    quot = np.floor(
        a.astype(np.float64) * b.astype(np.float64) / q.astype(np.float64)
    ).astype(np.uint64)
    prod = a.astype(np.uint64) * b.astype(np.uint64)
    r = np.asarray(prod - quot * q.astype(np.uint64)).view(np.int64)
    return np.mod(r, q)


def _mulmod_exact(a, b, q):
    out = (a.astype(object) * b.astype(object)) % q.astype(object)
    return out.astype(np.int64)


def addmod(a: np.ndarray, b: np.ndarray, q: np.ndarray | int) -> np.ndarray:
    s = a + b
    return np.where(s >= q, s - q, s)


def submod(a: np.ndarray, b: np.ndarray, q: np.ndarray | int) -> np.ndarray:
    d = a - b
    return np.where(d < 0, d + q, d)


def negmod(a: np.ndarray, q: np.ndarray | int) -> np.ndarray:
    return np.where(a == 0, a, q - a)


# ---------------------------------------------------------------------------
# chains


@dataclass(frozen=True)
class ModulusChain:
    """RNS moduli ``q_0..q_L`` and auxiliary ``p_0..p_{k-1}`` for one ring degree.

    Limbs are addressed by position in :attr:`moduli` (q-chain first, then
    the p-chain).  Digits partition the q-chain into ``beta`` contiguous runs
    of ``alpha = ceil((L+1)/beta)`` limbs; the final digit may be shorter.
    """

    ring_degree: int
    q_chain: tuple[PrimeModulus, ...]
    p_chain: tuple[PrimeModulus, ...]
    beta: int
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    _lock: threading.Lock = field(
        default_factory=threading.Lock, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        values = [m.q for m in self.q_chain + self.p_chain]
        if len(set(values)) != len(values):
            raise ValueError("moduli must be pairwise distinct")
        if not self.q_chain:
            raise ValueError("q-chain is empty")
        digits = _digit_partition(len(self.q_chain), self.beta)
        if len(digits) != self.beta:
            raise ValueError(
                f"cannot split L+1={len(self.q_chain)} limbs into beta={self.beta} digits"
            )

    @property
    def L(self) -> int:
        return len(self.q_chain) - 1

    @property
    def k(self) -> int:
        return len(self.p_chain)

    @property
    def alpha(self) -> int:
        return -(-len(self.q_chain) // self.beta)

    @property
    def moduli(self) -> tuple[PrimeModulus, ...]:
        return self.q_chain + self.p_chain

    @property
    def values(self) -> tuple[int, ...]:
        return tuple(m.q for m in self.moduli)

    def q_limbs(self, level: int) -> tuple[int, ...]:
        return tuple(range(level + 1))

    @property
    def p_limbs(self) -> tuple[int, ...]:
        return tuple(range(self.L + 1, self.L + 1 + self.k))

    def ext_limbs(self, level: int) -> tuple[int, ...]:
        """Limb positions of the extended basis ``P*Q_level``."""
        return self.q_limbs(level) + self.p_limbs

    def digits(self, level: int | None = None) -> list[tuple[int, ...]]:
        """Digit limb groups, truncated to the q-limbs active at ``level``."""
        level = self.L if level is None else level
        groups = _digit_partition(self.L + 1, self.beta)
        return [g for g in (tuple(i for i in grp if i <= level) for grp in groups) if g]

    def product(self, limbs: Sequence[int]) -> int:
        return math.prod(self.moduli[i].q for i in limbs)

    @property
    def log_q(self) -> int:
        return sum(m.bits for m in self.q_chain)

    @property
    def log_p(self) -> int:
        return sum(m.bits for m in self.p_chain)

    def column(self, limbs: Sequence[int]) -> np.ndarray:
        """Moduli of ``limbs`` as an ``(len, 1)`` int64 column for broadcasting."""
        key = ("col", tuple(limbs))
        col = self._cache.get(key)
        if col is None:
            col = np.array([self.moduli[i].q for i in limbs], dtype=object)
            col = col.astype(np.int64).reshape(-1, 1)
            self.cached(key, col)
        return col

    def cached(self, key, value):
        with self._lock:
            return self._cache.setdefault(key, value)

    def lookup(self, key):
        return self._cache.get(key)


def _digit_partition(count: int, beta: int) -> list[tuple[int, ...]]:
    if beta < 1:
        return []
    alpha = -(-count // beta)
    return [tuple(range(s, min(s + alpha, count))) for s in range(0, count, alpha)]


def next_prime_1_mod(bits: int, modulus: int, exclude: set[int]) -> int:
    """Smallest prime ``>= 2**(bits-1)`` that is 1 mod ``modulus`` and not excluded."""
    lo = 1 << (bits - 1)
    c = lo + (1 - lo) % modulus
    if c < 2:
        c += modulus
    while c < 1 << MAX_MODULUS_BITS:
        if c not in exclude and isprime(c):
            return c
        c += modulus
    raise ValueError(f"no {bits}-bit prime = 1 mod {modulus} below 2^{MAX_MODULUS_BITS}")


def generate_chain(
    ring_degree: int,
    target_bits_q: Sequence[int],
    target_bits_p: Sequence[int],
    beta: int,
) -> ModulusChain:
    """Deterministic chain: ascending prime scan per target bit size."""
    if ring_degree < 2 or ring_degree & (ring_degree - 1):
        raise ValueError(f"ring degree {ring_degree} is not a power of two")
    if len(_digit_partition(len(target_bits_q), beta)) != beta:
        raise ValueError(
            f"beta={beta} does not divide L+1={len(target_bits_q)} into nonempty digits"
        )
    for bits in (*target_bits_q, *target_bits_p):
        if not 2 <= bits <= MAX_MODULUS_BITS:
            raise ValueError(f"prime size {bits} outside [2, {MAX_MODULUS_BITS}]")
    chosen: set[int] = set()
    picked = []
    for bits in (*target_bits_q, *target_bits_p):
        q = next_prime_1_mod(bits, 2 * ring_degree, chosen)
        chosen.add(q)
        picked.append(PrimeModulus.create(q, ring_degree))
    nq = len(target_bits_q)
    return ModulusChain(ring_degree, tuple(picked[:nq]), tuple(picked[nq:]), beta)


def split_bits(total: int, count: int) -> list[int]:
    """Split ``total`` bits over ``count`` limbs as evenly as possible, larger first."""
    base, extra = divmod(total, count)
    return [base + 1] * extra + [base] * (count - extra)


# ---------------------------------------------------------------------------
# base conversion


def base_conv(
    residues: np.ndarray, source: Sequence[int], target: Sequence[int]
) -> np.ndarray:
    """Fast (approximate) RNS basis conversion of coefficient-domain residues.

    ``residues`` has one row per modulus in ``source``.  The returned rows are
    ``sum_i [x_i * (B/b_i)^-1]_{b_i} * (B/b_i) mod c_j`` for each ``c_j`` in
    ``target``; the implied integer exceeds the exact value by ``e * B`` with
    ``0 <= e < len(source)``.
    """
    source, target = tuple(source), tuple(target)
    if set(source) & set(target):
        raise ValueError("source and target bases must be disjoint")
    inv_col, hat = _conv_constants(source, target)
    src = np.array(source, dtype=np.int64).reshape(-1, 1)
    dst = np.array(target, dtype=np.int64).reshape(-1, 1)
    y = mulmod(np.asarray(residues, dtype=np.int64), inv_col, src)
    out = np.zeros((len(target), y.shape[1]), dtype=np.int64)
    for i in range(len(source)):
        out = addmod(out, mulmod(y[i][None, :], hat[:, i : i + 1], dst), dst)
    return out


_conv_cache: dict = {}
_conv_lock = threading.Lock()


def _conv_constants(source, target):
    key = (source, target)
    hit = _conv_cache.get(key)
    if hit is not None:
        return hit
    big = reduce(lambda x, y: x * y, source, 1)
    inv = [pow(big // b, -1, b) for b in source]
    hat = [[(big // b) % c for b in source] for c in target]
    value = (
        np.array(inv, dtype=object).astype(np.int64).reshape(-1, 1),
        np.array(hat, dtype=object).astype(np.int64).reshape(len(target), len(source)),
    )
    with _conv_lock:
        return _conv_cache.setdefault(key, value)


def crt_reconstruct(residues: np.ndarray, moduli: Sequence[int], centered=False) -> np.ndarray:
    """Exact CRT lift to Python integers (object array), optionally centred."""
    big = math.prod(moduli)
    acc = np.zeros(np.asarray(residues).shape[1], dtype=object)
    for row, b in zip(residues, moduli):
        hat = big // b
        acc = acc + np.asarray(row).astype(object) * (hat * pow(hat, -1, b))
    acc = acc % big
    if centered:
        acc = np.where(acc > big // 2, acc - big, acc)
    return acc
