"""Polynomials in ``Z_Q[X]/(X^N + 1)`` stored as an RNS limb grid."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .rns import ModulusChain, addmod, mulmod, negmod, submod


class Domain(enum.IntEnum):
    COEFF = 0
    EVAL = 1


class DomainError(ValueError):
    pass


class LimbMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RingPoly:
    """A ring element: ``coeffs[i]`` holds residues modulo ``chain.moduli[limbs[i]]``.

    In the evaluation domain, position ``i`` is the value at
    ``psi ** (2 * bitrev(i) + 1)`` for the limb's primitive 2N-th root ``psi``.
    """

    chain: ModulusChain
    limbs: tuple[int, ...]
    coeffs: np.ndarray
    domain: Domain

    def __post_init__(self):
        if self.coeffs.shape != (len(self.limbs), self.chain.ring_degree):
            raise ValueError(
                f"coefficient grid {self.coeffs.shape} does not match "
                f"{len(self.limbs)} limbs x N={self.chain.ring_degree}"
            )

    @property
    def n(self) -> int:
        return self.chain.ring_degree

    @property
    def moduli(self) -> np.ndarray:
        return self.chain.column(self.limbs)

    def replace(self, coeffs: np.ndarray, domain: Domain | None = None, limbs=None) -> "RingPoly":
        return RingPoly(
            self.chain,
            self.limbs if limbs is None else tuple(limbs),
            coeffs,
            self.domain if domain is None else domain,
        )

    def select(self, limbs: Sequence[int]) -> "RingPoly":
        """Restrict to a subset of this polynomial's limbs (in the given order)."""
        pos = {l: i for i, l in enumerate(self.limbs)}
        try:
            rows = [pos[l] for l in limbs]
        except KeyError as exc:
            raise LimbMismatch(f"limb {exc.args[0]} not present") from None
        return self.replace(self.coeffs[rows], limbs=limbs)

    def __add__(self, other: "RingPoly") -> "RingPoly":
        return add(self, other)

    def __sub__(self, other: "RingPoly") -> "RingPoly":
        return sub(self, other)

    def __neg__(self) -> "RingPoly":
        return self.replace(negmod(self.coeffs, self.moduli))


def zeros(chain: ModulusChain, limbs: Sequence[int], domain=Domain.EVAL) -> RingPoly:
    limbs = tuple(limbs)
    return RingPoly(chain, limbs, np.zeros((len(limbs), chain.ring_degree), np.int64), domain)


def from_integers(chain: ModulusChain, limbs: Sequence[int], values) -> RingPoly:
    """Coefficient-domain polynomial from signed integer coefficients."""
    limbs = tuple(limbs)
    values = np.asarray(values)
    if values.dtype == object or np.abs(values).max(initial=0) >= 1 << 62:
        values = values.astype(object)
        rows = [(values % chain.moduli[l].q).astype(np.int64) for l in limbs]
        return RingPoly(chain, limbs, np.array(rows, dtype=np.int64), Domain.COEFF)
    values = values.astype(np.int64)
    return RingPoly(chain, limbs, np.mod(values[None, :], chain.column(limbs)), Domain.COEFF)


# ---------------------------------------------------------------------------
# NTT


def _bitrev(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _tables(chain: ModulusChain, limbs: tuple[int, ...]):
    key = ("ntt", limbs)
    hit = chain.lookup(key)
    if hit is not None:
        return hit
    n = chain.ring_degree
    rev = _bitrev(n)
    fwd, inv, ninv = [], [], []
    for l in limbs:
        m = chain.moduli[l]
        powers = _powers(m.two_n_root, n, m.q)
        ipowers = _powers(pow(m.two_n_root, -1, m.q), n, m.q)
        fwd.append([powers[r] for r in rev])
        inv.append([ipowers[r] for r in rev])
        ninv.append(pow(n, -1, m.q))
    value = (
        np.array(fwd, dtype=object).astype(np.int64),
        np.array(inv, dtype=object).astype(np.int64),
        np.array(ninv, dtype=object).astype(np.int64).reshape(-1, 1),
    )
    return chain.cached(key, value)


def _powers(w: int, n: int, q: int) -> list[int]:
    out = [1] * n
    for i in range(1, n):
        out[i] = out[i - 1] * w % q
    return out


def ntt(p: RingPoly) -> RingPoly:
    """Negacyclic forward transform (Cooley-Tukey, bit-reversed output)."""
    if p.domain != Domain.COEFF:
        raise DomainError("ntt expects a coefficient-domain polynomial")
    psi, _, _ = _tables(p.chain, p.limbs)
    a = p.coeffs
    r, n = a.shape
    q3 = p.moduli.reshape(r, 1, 1)
    t, m = n, 1
    while m < n:
        t //= 2
        v = a.reshape(r, m, 2, t)
        s = psi[:, m : 2 * m].reshape(r, m, 1)
        u, w = v[:, :, 0, :], mulmod(v[:, :, 1, :], s, q3)
        a = np.stack([addmod(u, w, q3), submod(u, w, q3)], axis=2).reshape(r, n)
        m *= 2
    return p.replace(np.ascontiguousarray(a), Domain.EVAL)


def intt(p: RingPoly) -> RingPoly:
    """Inverse of :func:`ntt` (Gentleman-Sande)."""
    if p.domain != Domain.EVAL:
        raise DomainError("intt expects an evaluation-domain polynomial")
    _, psi_inv, n_inv = _tables(p.chain, p.limbs)
    a = p.coeffs
    r, n = a.shape
    q = p.moduli
    q3 = q.reshape(r, 1, 1)
    t, m = 1, n
    while m > 1:
        h = m // 2
        v = a.reshape(r, h, 2, t)
        s = psi_inv[:, h:m].reshape(r, h, 1)
        u, w = v[:, :, 0, :], v[:, :, 1, :]
        a = np.stack([addmod(u, w, q3), mulmod(submod(u, w, q3), s, q3)], axis=2).reshape(r, n)
        t *= 2
        m = h
    return p.replace(mulmod(a, n_inv, q), Domain.COEFF)


# ---------------------------------------------------------------------------
# automorphisms


def galois_element(r: int, n: int) -> int:
    return pow(5, r % (n // 2), 2 * n)


@lru_cache(maxsize=None)
def _eval_permutation(n: int, g: int) -> np.ndarray:
    rev = _bitrev(n)
    exps = 2 * rev + 1
    pos = np.empty(2 * n, dtype=np.int64)
    pos[exps] = np.arange(n)
    return pos[(exps * g) % (2 * n)]


@lru_cache(maxsize=None)
def _coeff_map(n: int, g: int) -> tuple[np.ndarray, np.ndarray]:
    dest = (np.arange(n) * g) % (2 * n)
    return dest % n, dest >= n


def automorph(p: RingPoly, r: int) -> RingPoly:
    """Apply ``X -> X^(5^r mod 2N)``, which rotates slots left by ``r``."""
    g = galois_element(r, p.n)
    if g == 1:
        return p
    if p.domain == Domain.EVAL:
        return p.replace(p.coeffs[:, _eval_permutation(p.n, g)])
    dest, flip = _coeff_map(p.n, g)
    out = np.empty_like(p.coeffs)
    out[:, dest] = np.where(flip, negmod(p.coeffs, p.moduli), p.coeffs)
    return p.replace(out)


# ---------------------------------------------------------------------------
# element-wise arithmetic


def _check(p: RingPoly, q: RingPoly):
    if p.chain is not q.chain:
        raise LimbMismatch("polynomials belong to different chains")
    if p.limbs != q.limbs:
        raise LimbMismatch(f"limb sets differ: {p.limbs} vs {q.limbs}")
    if p.domain != q.domain:
        raise DomainError("domain mismatch")


def add(p: RingPoly, q: RingPoly) -> RingPoly:
    _check(p, q)
    return p.replace(addmod(p.coeffs, q.coeffs, p.moduli))


def sub(p: RingPoly, q: RingPoly) -> RingPoly:
    _check(p, q)
    return p.replace(submod(p.coeffs, q.coeffs, p.moduli))


def pointwise_mul(p: RingPoly, q: RingPoly) -> RingPoly:
    _check(p, q)
    if p.domain != Domain.EVAL:
        raise DomainError("pointwise_mul requires the evaluation domain")
    return p.replace(mulmod(p.coeffs, q.coeffs, p.moduli))


def scalar_mul(p: RingPoly, c: int | Sequence[int]) -> RingPoly:
    """Multiply by an integer, or by one already-reduced constant per limb."""
    if isinstance(c, (int, np.integer)):
        c = [int(c) % p.chain.moduli[l].q for l in p.limbs]
    col = np.array(list(c), dtype=object).astype(np.int64).reshape(-1, 1)
    return p.replace(mulmod(p.coeffs, col, p.moduli))


# ---------------------------------------------------------------------------
# limb edits


def drop_last_limb(p: RingPoly) -> RingPoly:
    if len(p.limbs) < 2:
        raise LimbMismatch("cannot drop the only limb")
    return p.replace(p.coeffs[:-1], limbs=p.limbs[:-1])


def extend_limbs(p: RingPoly, new_limbs: Sequence[int], values: np.ndarray) -> RingPoly:
    new_limbs = tuple(new_limbs)
    if set(new_limbs) & set(p.limbs):
        raise LimbMismatch("extension limb already present")
    values = np.asarray(values, dtype=np.int64).reshape(len(new_limbs), p.n)
    return p.replace(np.concatenate([p.coeffs, values]), limbs=p.limbs + new_limbs)
