"""End-to-end encrypted ``A x B`` with an operation-count ledger.

Step 1 applies sigma to ``A`` and tau to ``B``.  Step 2 sums
``Mult(HLT(A0, epsilon^k), HLT(B0, omega^k))`` over ``k < l`` and rescales the
sum once.  Three levels are consumed in total.
"""

from __future__ import annotations

import threading
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import ckks
from .ckks import Ciphertext, KeySet, LevelError, MissingKey, PublicKey, SecretKey
from .hlt import HltPlan, Mode, run_hlt
from .probe import NULL_PROBE, CountingProbe, Probe
from .rns import ModulusChain
from .transform import (
    SIGMA,
    TAU,
    DiagonalSet,
    MatrixDims,
    diag_count,
    epsilon,
    extract_diagonals,
    flatten,
    omega,
    unflatten,
)

DEPTH = 3
OPS = ("Add", "Mult", "CMult", "Rot")


@dataclass
class OpLedger:
    """Closed-form and measured operation counts of one product."""

    dims: MatrixDims
    formula: dict[str, int]
    measured: dict[str, int] = field(default_factory=lambda: dict.fromkeys(OPS, 0))
    depth_consumed: int = 0
    hlt_invocations: int = 0
    subops: Counter = field(default_factory=Counter)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def bump(self, **counts: int):
        with self._lock:
            for name, c in counts.items():
                self.measured[name] += c

    def as_dict(self) -> dict:
        return {
            "dims": self.dims.label,
            "formula": dict(self.formula),
            "measured": dict(self.measured),
            "depth_consumed": self.depth_consumed,
            "hlt_invocations": self.hlt_invocations,
            "subops": dict(sorted(self.subops.items())),
        }


def ledger_formulas(dims: MatrixDims) -> OpLedger:
    """Predicted counts: ``phi = d_sigma + d_tau``, ``zeta = l * (d_eps + d_omega)``."""
    phi = diag_count(SIGMA, dims) + diag_count(TAU, dims)
    zeta = dims.l * (diag_count(epsilon(0), dims) + diag_count(omega(0), dims))
    formula = {"Add": phi + zeta + dims.l, "Mult": dims.l, "CMult": phi + zeta, "Rot": phi + zeta}
    ledger = OpLedger(dims, formula)
    ledger.depth_consumed = DEPTH
    ledger.hlt_invocations = 2 * (dims.l + 1)
    ledger.measured = dict(formula)
    return ledger


@lru_cache(maxsize=64)
def matmul_diagonals(dims: MatrixDims, slots: int) -> dict:
    """Every diagonal set of one product, keyed by ``str(kind)``."""
    dims.check_slots(slots)
    kinds = [SIGMA, TAU] + [f(k) for k in range(dims.l) for f in (epsilon, omega)]
    return {str(kind): extract_diagonals(kind, dims, slots) for kind in kinds}


def required_rotations(dims: MatrixDims, slots: int) -> list[int]:
    steps = set()
    for dset in matmul_diagonals(dims, slots).values():
        steps.update(z for z in dset.indices if z)
    return sorted(steps)


def _hlt(ct, dset: DiagonalSet, keys: KeySet, mode, probe, ledger: OpLedger):
    plan = HltPlan.build(dset, keys, mode)
    counter = CountingProbe()
    out = run_hlt(ct, plan, _Tee(probe, counter))
    ledger.bump(
        Rot=plan.rotations,
        CMult=len(dset),
        Add=len(dset) - 1,
    )
    with ledger._lock:
        ledger.hlt_invocations += 1
        ledger.subops.update(counter.subops)
    return out


class _Tee(Probe):
    def __init__(self, *probes: Probe):
        self.probes = probes

    def on_read(self, region, nbytes):
        for p in self.probes:
            p.on_read(region, nbytes)

    def on_write(self, region, nbytes):
        for p in self.probes:
            p.on_write(region, nbytes)

    def on_subop(self, name):
        for p in self.probes:
            p.on_subop(name)


def he_mm(
    ct_a: Ciphertext,
    ct_b: Ciphertext,
    dims: MatrixDims,
    keys: KeySet,
    mode: Mode | str = Mode.HOISTED,
    probe: Probe | None = None,
    min_level: int = 4,
) -> tuple[Ciphertext, OpLedger]:
    """Encrypted column-major ``A x B``; decrypts into the first ``m*n`` slots."""
    probe = probe or NULL_PROBE
    mode = Mode(mode)
    if ct_a.level != ct_b.level:
        raise LevelError(f"operand levels differ: {ct_a.level} vs {ct_b.level}")
    if ct_a.level < min_level:
        raise LevelError(f"matrix product needs level >= {min_level}, got {ct_a.level}")
    if keys.mult is None:
        raise MissingKey("matrix product needs the relinearisation key")
    slots = ct_a.chain.ring_degree // 2
    sets = matmul_diagonals(dims, slots)
    ledger = ledger_formulas(dims)
    ledger.measured = dict.fromkeys(OPS, 0)
    ledger.hlt_invocations = 0
    start = ct_a.level

    a0 = _hlt(ct_a, sets["sigma"], keys, mode, probe, ledger)
    b0 = _hlt(ct_b, sets["tau"], keys, mode, probe, ledger)
    acc = None
    for k in range(dims.l):
        ak = _hlt(a0, sets[str(epsilon(k))], keys, mode, probe, ledger)
        bk = _hlt(b0, sets[str(omega(k))], keys, mode, probe, ledger)
        prod = ckks.mult(ak, bk, keys.mult, probe)
        ledger.bump(Mult=1)
        if acc is None:
            acc = prod
        else:
            acc = ckks.add(acc, prod, probe)
            ledger.bump(Add=1)
    out = ckks.rescale(acc, probe)
    ledger.depth_consumed = start - out.level
    return out, ledger


# ---------------------------------------------------------------------------
# a ready-to-run client/server bundle


@dataclass(frozen=True, eq=False)
class MatmulContext:
    chain: ModulusChain
    scale: float
    sk: SecretKey
    pk: PublicKey
    keys: KeySet
    rng: np.random.Generator

    @classmethod
    def create(cls, chain: ModulusChain, dims: MatrixDims, scale: float, seed: int) -> "MatmulContext":
        slots = chain.ring_degree // 2
        dims.check_slots(slots)
        sk, pk = ckks.keygen(chain, seed)
        keys = ckks.gen_keyset(sk, required_rotations(dims, slots), seed)
        return cls(chain, scale, sk, pk, keys, np.random.default_rng([seed, 1]))

    @property
    def slots(self) -> int:
        return self.chain.ring_degree // 2

    def encrypt(self, matrix, level: int | None = None) -> Ciphertext:
        vec = flatten(np.asarray(matrix, dtype=float), self.slots)
        level = self.chain.L if level is None else level
        return ckks.encrypt_values(vec, self.scale, self.pk, self.chain, level, self.rng)

    def decrypt(self, ct: Ciphertext, rows: int, cols: int) -> np.ndarray:
        return unflatten(ckks.decrypt_values(ct, self.sk), rows, cols)

    def multiply(self, a, b, mode=Mode.HOISTED, probe=None, **kw):
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        dims = MatrixDims(a.shape[0], a.shape[1], b.shape[1])
        if b.shape[0] != dims.l:
            raise ValueError(f"inner dimensions differ: {a.shape} x {b.shape}")
        out, ledger = he_mm(self.encrypt(a), self.encrypt(b), dims, self.keys, mode, probe, **kw)
        return self.decrypt(out, dims.m, dims.n), ledger, out
