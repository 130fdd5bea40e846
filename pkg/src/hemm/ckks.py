"""CKKS over an RNS chain: encoding, keys, Add/CMult/Mult/Rot and KeySwitch.

Ciphertexts are pairs ``(a, b)`` that decrypt as ``a + b*s``; both parts stay
in the evaluation domain.  Key switching uses digit decomposition with a
special modulus ``P``: ``Decomp -> ModUp -> KeyIP -> ModDown``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from . import poly as rp
from .poly import Domain, RingPoly
from .probe import NULL_PROBE, Probe
from .rns import ModulusChain, base_conv, crt_reconstruct

ERROR_ETA = 21  # centred binomial with variance 10.5, i.e. sigma ~ 3.2


class LevelError(ValueError):
    pass


class ScaleMismatch(ValueError):
    pass


class MissingKey(KeyError):
    pass


@dataclass(frozen=True, eq=False)
class Plaintext:
    poly: RingPoly
    scale: float
    level: int

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("plaintext scale must be positive")

    @property
    def extended(self) -> bool:
        return len(self.poly.limbs) > self.level + 1


@dataclass(frozen=True, eq=False)
class Ciphertext:
    a: RingPoly
    b: RingPoly
    level: int
    scale: float

    def __post_init__(self):
        if self.a.limbs != self.b.limbs or self.a.domain != self.b.domain:
            raise ValueError("ciphertext parts disagree on limbs or domain")
        if self.a.limbs != self.a.chain.q_limbs(self.level):
            raise ValueError(f"ciphertext at level {self.level} has limbs {self.a.limbs}")

    @property
    def chain(self) -> ModulusChain:
        return self.a.chain

    @property
    def nbytes(self) -> int:
        return 2 * self.a.coeffs.nbytes


@dataclass(frozen=True, eq=False)
class SecretKey:
    chain: ModulusChain
    coeffs: np.ndarray  # ternary, int64
    poly: RingPoly  # evaluation domain over every chain modulus

    def at(self, limbs: Sequence[int]) -> RingPoly:
        return self.poly.select(limbs)


@dataclass(frozen=True, eq=False)
class PublicKey:
    a: RingPoly
    b: RingPoly


Purpose = Union[str, int]  # "mult" or a rotation step


@dataclass(frozen=True, eq=False)
class EvalKey:
    """``beta`` rows of ``(a_j, b_j)`` over ``P*Q_L``, in the evaluation domain."""

    purpose: Purpose
    rows: tuple[tuple[RingPoly, RingPoly], ...]

    @property
    def beta(self) -> int:
        return len(self.rows)

    @property
    def nbytes(self) -> int:
        return sum(a.coeffs.nbytes + b.coeffs.nbytes for a, b in self.rows)


@dataclass(frozen=True, eq=False)
class KeySet:
    """Server-side evaluation keys: relinearisation plus one key per rotation step."""

    mult: EvalKey | None
    rotations: dict[int, EvalKey]

    def rotation(self, r: int) -> EvalKey:
        try:
            return self.rotations[r]
        except KeyError:
            raise MissingKey(f"no rotation key for step {r}") from None


# ---------------------------------------------------------------------------
# encoding


@lru_cache(maxsize=None)
def _embedding(n: int):
    slots = n // 2
    exps = np.array([pow(5, j, 2 * n) for j in range(slots)], dtype=np.int64)
    pos = (exps - 1) // 2
    conj = n - 1 - pos
    twist = np.exp(1j * np.pi * np.arange(n) / n)
    return pos, conj, twist


def slots_to_coeffs(values: np.ndarray, n: int) -> np.ndarray:
    """Inverse canonical embedding: real coefficients whose slots are ``values``."""
    pos, conj, twist = _embedding(n)
    evals = np.zeros(n, dtype=complex)
    evals[pos] = values
    evals[conj] = np.conj(values)
    return (np.fft.fft(evals) / n * np.conj(twist)).real


def coeffs_to_slots(coeffs: np.ndarray, n: int) -> np.ndarray:
    pos, _, twist = _embedding(n)
    return (n * np.fft.ifft(np.asarray(coeffs, dtype=float) * twist))[pos]


def encode(
    values,
    scale: float,
    chain: ModulusChain,
    level: int,
    extended: bool = False,
) -> Plaintext:
    """Encode ``N/2`` slot values at ``level``; ``extended`` adds the P limbs."""
    n = chain.ring_degree
    values = np.asarray(values, dtype=complex)
    if values.shape != (n // 2,):
        raise ValueError(f"expected {n // 2} slots, got shape {values.shape}")
    scaled = slots_to_coeffs(values, n) * scale
    bound = chain.product(chain.q_limbs(level)) // 2
    peak = float(np.abs(scaled).max(initial=0.0))
    if peak >= bound:
        raise OverflowError(f"scaled message {peak:.3g} exceeds Q_{level}/2")
    if peak < 2.0**62:
        ints = np.rint(scaled).astype(np.int64)
    else:
        ints = np.array([int(round(x)) for x in scaled], dtype=object)
    limbs = chain.ext_limbs(level) if extended else chain.q_limbs(level)
    return Plaintext(rp.ntt(rp.from_integers(chain, limbs, ints)), float(scale), level)


def decode(pt: Plaintext) -> np.ndarray:
    chain = pt.poly.chain
    coeffs = rp.intt(pt.poly.select(chain.q_limbs(pt.level)))
    lifted = crt_reconstruct(coeffs.coeffs, chain.values[: pt.level + 1], centered=True)
    return coeffs_to_slots(lifted.astype(float) / pt.scale, chain.ring_degree)


# ---------------------------------------------------------------------------
# sampling and keys


def sample_ternary(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(-1, 2, size=n, dtype=np.int64)


def sample_error(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.binomial(2 * ERROR_ETA, 0.5, size=n).astype(np.int64) - ERROR_ETA


def sample_uniform(chain: ModulusChain, limbs: Sequence[int], rng) -> RingPoly:
    rows = [rng.integers(0, chain.moduli[l].q, size=chain.ring_degree, dtype=np.int64) for l in limbs]
    return RingPoly(chain, tuple(limbs), np.array(rows, dtype=np.int64), Domain.EVAL)


def _small(chain, limbs, ints) -> RingPoly:
    return rp.ntt(rp.from_integers(chain, limbs, ints))


def keygen(chain: ModulusChain, seed: int) -> tuple[SecretKey, PublicKey]:
    rng = np.random.default_rng([seed, 0])
    n = chain.ring_degree
    s = sample_ternary(rng, n)
    every = tuple(range(len(chain.moduli)))
    sk = SecretKey(chain, s, _small(chain, every, s))
    q = chain.q_limbs(chain.L)
    pk_b = sample_uniform(chain, q, rng)
    pk_a = rp.sub(_small(chain, q, sample_error(rng, n)), rp.pointwise_mul(pk_b, sk.at(q)))
    return sk, PublicKey(pk_a, pk_b)


def _purpose_code(purpose: Purpose) -> int:
    return 1 if purpose == "mult" else 2 + int(purpose)


def gen_evk(sk: SecretKey, purpose: Purpose, seed: int) -> EvalKey:
    """Key that switches ``x * s'`` to the key ``s``; ``s' = s^2`` or ``psi_r(s)``."""
    chain = sk.chain
    rng = np.random.default_rng([seed, _purpose_code(purpose)])
    ext = chain.ext_limbs(chain.L)
    s = sk.at(ext)
    if purpose == "mult":
        target = rp.pointwise_mul(s, s)
    else:
        target = rp.automorph(s, int(purpose))
    big_p = chain.product(chain.p_limbs)
    big_q = chain.product(chain.q_limbs(chain.L))
    rows = []
    for digit in chain.digits():
        d = chain.product(digit)
        gadget = big_p * (big_q // d) * pow(big_q // d, -1, d)
        factor = [gadget % chain.moduli[l].q for l in ext]
        b = sample_uniform(chain, ext, rng)
        e = _small(chain, ext, sample_error(rng, chain.ring_degree))
        a = rp.add(rp.sub(e, rp.pointwise_mul(b, s)), rp.scalar_mul(target, factor))
        rows.append((a, b))
    return EvalKey(purpose, tuple(rows))


def gen_keyset(sk: SecretKey, rotations, seed: int, mult: bool = True) -> KeySet:
    rots = {int(r): gen_evk(sk, int(r), seed) for r in sorted(set(rotations)) if r}
    return KeySet(gen_evk(sk, "mult", seed) if mult else None, rots)


# ---------------------------------------------------------------------------
# encryption


def encrypt(pt: Plaintext, pk: PublicKey, rng: np.random.Generator) -> Ciphertext:
    if pt.extended:
        raise ValueError("cannot encrypt an extended-basis plaintext")
    chain = pt.poly.chain
    limbs = chain.q_limbs(pt.level)
    n = chain.ring_degree
    v = _small(chain, limbs, sample_ternary(rng, n))
    e0 = _small(chain, limbs, sample_error(rng, n))
    e1 = _small(chain, limbs, sample_error(rng, n))
    a = rp.add(rp.add(rp.pointwise_mul(v, pk.a.select(limbs)), e0), pt.poly)
    b = rp.add(rp.pointwise_mul(v, pk.b.select(limbs)), e1)
    return Ciphertext(a, b, pt.level, pt.scale)


def decrypt(ct: Ciphertext, sk: SecretKey) -> Plaintext:
    m = rp.add(ct.a, rp.pointwise_mul(ct.b, sk.at(ct.a.limbs)))
    return Plaintext(m, ct.scale, ct.level)


def encrypt_values(values, scale, pk: PublicKey, chain, level, rng) -> Ciphertext:
    return encrypt(encode(values, scale, chain, level), pk, rng)


def decrypt_values(ct: Ciphertext, sk: SecretKey) -> np.ndarray:
    return decode(decrypt(ct, sk)).real


# ---------------------------------------------------------------------------
# key-switching sub-operations


def decomp(x: RingPoly, level: int, probe: Probe = NULL_PROBE) -> list[RingPoly]:
    """Split a Q_level polynomial into its digit limb groups."""
    probe.on_subop("Decomp")
    return [x.select(d) for d in x.chain.digits(level)]


def modup(digit: RingPoly, level: int, probe: Probe = NULL_PROBE) -> RingPoly:
    """Extend a digit to ``P*Q_level`` (iNTT -> BaseConv -> NTT on new limbs)."""
    probe.on_subop("ModUp")
    chain = digit.chain
    ext = chain.ext_limbs(level)
    missing = tuple(l for l in ext if l not in digit.limbs)
    probe.on_read("ct", digit.coeffs.nbytes)
    coeff = rp.intt(digit)
    vals = chain.values
    conv = base_conv(coeff.coeffs, [vals[l] for l in digit.limbs], [vals[l] for l in missing])
    conv = rp.ntt(RingPoly(chain, missing, conv, Domain.COEFF))
    rows = {l: r for l, r in zip(digit.limbs, digit.coeffs)}
    rows.update(zip(missing, conv.coeffs))
    out = RingPoly(chain, ext, np.array([rows[l] for l in ext]), Domain.EVAL)
    probe.on_write("ct", out.coeffs.nbytes)
    return out


def p_embed(x: RingPoly, level: int) -> RingPoly:
    """``P * x`` over ``P*Q_level``: exact lift of a Q-basis poly into the extended basis."""
    chain = x.chain
    big_p = chain.product(chain.p_limbs)
    scaled = rp.scalar_mul(x, big_p)
    zeros = np.zeros((chain.k, chain.ring_degree), dtype=np.int64)
    return rp.extend_limbs(scaled, chain.p_limbs, zeros)


def keyip(
    digits: Sequence[RingPoly], evk: EvalKey, probe: Probe = NULL_PROBE
) -> tuple[RingPoly, RingPoly]:
    """Inner product of extended digits with the key rows."""
    probe.on_subop("KeyIP")
    if len(digits) > evk.beta:
        raise ValueError(f"{len(digits)} digits but key has {evk.beta} rows")
    limbs = digits[0].limbs
    u = v = None
    for d, (ka, kb) in zip(digits, evk.rows):
        probe.on_read("ct", d.coeffs.nbytes)
        ka, kb = ka.select(limbs), kb.select(limbs)
        probe.on_read("evk", ka.coeffs.nbytes + kb.coeffs.nbytes)
        tu, tv = rp.pointwise_mul(d, ka), rp.pointwise_mul(d, kb)
        u = tu if u is None else rp.add(u, tu)
        v = tv if v is None else rp.add(v, tv)
    probe.on_write("ct", u.coeffs.nbytes + v.coeffs.nbytes)
    return u, v


def divide_out(x: RingPoly, keep: Sequence[int], drop: Sequence[int]) -> RingPoly:
    """Approximate ``x / prod(drop)`` over ``keep`` via base conversion of the remainder."""
    chain = x.chain
    keep, drop = tuple(keep), tuple(drop)
    vals = chain.values
    rem = rp.intt(x.select(drop))
    conv = base_conv(rem.coeffs, [vals[l] for l in drop], [vals[l] for l in keep])
    conv = rp.ntt(RingPoly(chain, keep, conv, Domain.COEFF))
    d = chain.product(drop)
    inv = [pow(d, -1, vals[l]) for l in keep]
    return rp.scalar_mul(rp.sub(x.select(keep), conv), inv)


def moddown(x: RingPoly, level: int, probe: Probe = NULL_PROBE) -> RingPoly:
    probe.on_subop("ModDown")
    chain = x.chain
    probe.on_read("ct", x.coeffs.nbytes)
    out = divide_out(x, chain.q_limbs(level), chain.p_limbs)
    probe.on_write("ct", out.coeffs.nbytes)
    return out


def moddown_rescale(x: RingPoly, level: int, probe: Probe = NULL_PROBE) -> RingPoly:
    """Single reduction from ``P*Q_level`` straight to ``Q_(level-1)``."""
    if level < 1:
        raise LevelError("no limb left to rescale")
    probe.on_subop("ModDown+Rescale")
    chain = x.chain
    probe.on_read("ct", x.coeffs.nbytes)
    out = divide_out(x, chain.q_limbs(level - 1), (level,) + chain.p_limbs)
    probe.on_write("ct", out.coeffs.nbytes)
    return out


def keyswitch(
    x: RingPoly, evk: EvalKey, level: int, probe: Probe = NULL_PROBE
) -> tuple[RingPoly, RingPoly]:
    """``(u, v)`` with ``u + v*s ~ x * s'``, both over ``Q_level``."""
    probe.on_subop("KeySwitch")
    digits = [modup(d, level, probe) for d in decomp(x, level, probe)]
    u, v = keyip(digits, evk, probe)
    return moddown(u, level, probe), moddown(v, level, probe)


# ---------------------------------------------------------------------------
# homomorphic operations


def _same_scale(x: float, y: float) -> bool:
    return math.isclose(x, y, rel_tol=1e-9)


def add(ct: Ciphertext, other: Ciphertext, probe: Probe = NULL_PROBE) -> Ciphertext:
    if ct.level != other.level:
        raise LevelError(f"levels differ: {ct.level} vs {other.level}")
    if not _same_scale(ct.scale, other.scale):
        raise ScaleMismatch(f"scales differ: {ct.scale} vs {other.scale}")
    probe.on_subop("Add")
    probe.on_read("ct", ct.nbytes + other.nbytes)
    probe.on_write("ct", ct.nbytes)
    return Ciphertext(rp.add(ct.a, other.a), rp.add(ct.b, other.b), ct.level, ct.scale)


def cmult(ct: Ciphertext, pt: Plaintext, probe: Probe = NULL_PROBE) -> Ciphertext:
    if pt.level != ct.level or pt.extended:
        raise LevelError(f"plaintext level {pt.level} does not match ciphertext level {ct.level}")
    probe.on_subop("CMult")
    probe.on_read("ct", ct.nbytes)
    probe.on_read("pt", pt.poly.coeffs.nbytes)
    probe.on_write("ct", ct.nbytes)
    return Ciphertext(
        rp.pointwise_mul(ct.a, pt.poly),
        rp.pointwise_mul(ct.b, pt.poly),
        ct.level,
        ct.scale * pt.scale,
    )


def mult(ct: Ciphertext, other: Ciphertext, evk: EvalKey | None, probe: Probe = NULL_PROBE) -> Ciphertext:
    if evk is None or evk.purpose != "mult":
        raise MissingKey("mult requires the relinearisation key")
    if ct.level != other.level:
        raise LevelError(f"levels differ: {ct.level} vs {other.level}")
    probe.on_subop("Mult")
    probe.on_read("ct", ct.nbytes + other.nbytes)
    d0 = rp.pointwise_mul(ct.a, other.a)
    d1 = rp.add(rp.pointwise_mul(ct.a, other.b), rp.pointwise_mul(ct.b, other.a))
    d2 = rp.pointwise_mul(ct.b, other.b)
    u, v = keyswitch(d2, evk, ct.level, probe)
    probe.on_write("ct", ct.nbytes)
    return Ciphertext(rp.add(d0, u), rp.add(d1, v), ct.level, ct.scale * other.scale)


def rot(ct: Ciphertext, r: int, evk: EvalKey | None = None, probe: Probe = NULL_PROBE) -> Ciphertext:
    """Left-rotate the slots by ``r``; rotation by 0 without a key is the identity."""
    slots = ct.chain.ring_degree // 2
    if r % slots == 0 and evk is None:
        return ct
    if evk is None or evk.purpose == "mult" or int(evk.purpose) % slots != r % slots:
        raise MissingKey(f"no rotation key for step {r}")
    probe.on_subop("Rot")
    probe.on_subop("Automorph")
    probe.on_read("ct", ct.nbytes)
    probe.on_write("ct", ct.nbytes)
    a, b = rp.automorph(ct.a, r), rp.automorph(ct.b, r)
    u, v = keyswitch(b, evk, ct.level, probe)
    probe.on_subop("Add")
    return Ciphertext(rp.add(a, u), v, ct.level, ct.scale)


def rescale(ct: Ciphertext, probe: Probe = NULL_PROBE) -> Ciphertext:
    if ct.level < 1:
        raise LevelError("cannot rescale a level-0 ciphertext")
    probe.on_subop("Rescale")
    probe.on_read("ct", ct.nbytes)
    chain = ct.chain
    keep = chain.q_limbs(ct.level - 1)
    a = divide_out(ct.a, keep, (ct.level,))
    b = divide_out(ct.b, keep, (ct.level,))
    out = Ciphertext(a, b, ct.level - 1, ct.scale / chain.moduli[ct.level].q)
    probe.on_write("ct", out.nbytes)
    return out
