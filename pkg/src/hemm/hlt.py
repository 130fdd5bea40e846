"""Homomorphic linear transformation ``U v = sum_z u_z * rot(v, z)``.

Two interchangeable paths:

* :func:`hlt_baseline` runs one full key switch per rotation, then a CMult,
  an Add and a final Rescale.
* :func:`hlt_hoisted` decomposes and raises the input once, rotates the
  raised digits with automorphisms, fuses the mask multiply into the key
  inner product (:func:`diag_ip`) and leaves ``P*Q_l`` in a single merged
  ModDown+Rescale.

Masks are encoded at scale ``q_l`` (the prime dropped at the end), so both
paths return a ciphertext one level lower with the input's scale.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping

from . import ckks
from . import poly as rp
from .ckks import Ciphertext, EvalKey, KeySet, LevelError, MissingKey, Plaintext
from .poly import RingPoly
from .probe import NULL_PROBE, FusedView, Probe
from .transform import DiagonalSet


class Mode(str, enum.Enum):
    BASELINE = "baseline"
    HOISTED = "hoisted"


@dataclass(frozen=True, eq=False)
class HltPlan:
    """A diagonal set paired with the rotation keys it needs."""

    diagonals: DiagonalSet
    rotation_keys: Mapping[int, EvalKey]
    mode: Mode = Mode.HOISTED
    probe: Probe | None = None

    def __post_init__(self):
        if len(self.diagonals) == 0:
            raise ValueError("plan needs at least one diagonal")
        missing = [z for z in self.diagonals.indices if z and z not in self.rotation_keys]
        if missing:
            raise MissingKey(f"no rotation keys for steps {missing}")
        chains = {id(k.rows[0][0].chain) for k in self.rotation_keys.values()}
        if len(chains) > 1:
            raise ValueError("rotation keys belong to different chains")

    @classmethod
    def build(cls, diagonals: DiagonalSet, keys: KeySet, mode=Mode.HOISTED, probe=None) -> "HltPlan":
        rot = {z: keys.rotation(z) for z in diagonals.indices if z}
        return cls(diagonals, rot, Mode(mode), probe)

    @property
    def rotations(self) -> int:
        return sum(1 for z in self.diagonals.indices if z)


def _masks(plan: HltPlan, ct: Ciphertext, extended: bool) -> list[Plaintext]:
    chain = ct.chain
    if ct.level < 1:
        raise LevelError("HLT needs a level to rescale into")
    return plan.diagonals.encoded(chain, ct.level, chain.moduli[ct.level].q, extended)


def run_hlt(ct: Ciphertext, plan: HltPlan, probe: Probe | None = None) -> Ciphertext:
    fn = hlt_hoisted if plan.mode == Mode.HOISTED else hlt_baseline
    return fn(ct, plan, probe)


def hlt_baseline(ct: Ciphertext, plan: HltPlan, probe: Probe | None = None) -> Ciphertext:
    probe = probe or plan.probe or NULL_PROBE
    masks = _masks(plan, ct, extended=False)
    acc = None
    for (z, _), pt in zip(plan.diagonals.diagonals, masks):
        rotated = ckks.rot(ct, z, plan.rotation_keys.get(z), probe)
        term = ckks.cmult(rotated, pt, probe)
        acc = term if acc is None else ckks.add(acc, term, probe)
    return ckks.rescale(acc, probe)


def diag_ip(
    acc: tuple[RingPoly, RingPoly] | None,
    pair: tuple[RingPoly, RingPoly],
    a_rot: RingPoly | None,
    mask: Plaintext,
) -> tuple[RingPoly, RingPoly]:
    """``acc += u * (u_hat + a_rot, v_hat)`` over ``P*Q_l`` in the evaluation domain."""
    u, v = pair
    if a_rot is not None:
        u = rp.add(u, a_rot)
    tu, tv = rp.pointwise_mul(u, mask.poly), rp.pointwise_mul(v, mask.poly)
    if acc is None:
        return tu, tv
    return rp.add(acc[0], tu), rp.add(acc[1], tv)


def hlt_hoisted(ct: Ciphertext, plan: HltPlan, probe: Probe | None = None) -> Ciphertext:
    outer = probe or plan.probe or NULL_PROBE
    fused = FusedView(outer)
    level = ct.level
    masks = _masks(plan, ct, extended=True)
    outer.on_read("ct", ct.nbytes)

    digits = ckks.decomp(ct.b, level, fused)
    raised = [ckks.modup(d, level, fused) for d in digits]
    fused.on_subop("ModUp")  # the a-part as one extra pseudo-digit
    a_hat = ckks.p_embed(ct.a, level)
    b_hat = None

    acc = None
    for (z, _), pt in zip(plan.diagonals.diagonals, masks):
        outer.on_read("pt", pt.poly.coeffs.nbytes)
        if z == 0:
            if b_hat is None:
                b_hat = ckks.p_embed(ct.b, level)
            acc = diag_ip(acc, (a_hat, b_hat), None, pt)
            continue
        fused.on_subop("Automorph")
        rotated = [rp.automorph(r, z) for r in raised]
        pair = ckks.keyip(rotated, plan.rotation_keys[z], fused)
        acc = diag_ip(acc, pair, rp.automorph(a_hat, z), pt)

    a = ckks.moddown_rescale(acc[0], level, fused)
    b = ckks.moddown_rescale(acc[1], level, fused)
    scale = ct.scale * masks[0].scale / ct.chain.moduli[level].q
    out = Ciphertext(a, b, level - 1, scale)
    outer.on_write("ct", out.nbytes)
    return out
