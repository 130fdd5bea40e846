"""On-chip memory requirements and off-chip traffic estimates.

All sizes use the bit-packed convention: one coefficient of one limb takes
``logQ / (L+1) / 8`` bytes, so ``B_limb = N * logQ / (L+1) / 8`` and a
ciphertext at level ``l`` is ``2 * (l+1) * B_limb``.  The runtime's 64-bit
words never enter this module.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

from .params import ParameterSet
from .probe import CountingProbe
from .transform import SIGMA, MatrixDims, TransformKind, diag_count

COARSE = "coarse"
MOHLT = "mohlt"
SCHEDULES = (COARSE, MOHLT)


def coeff_size(ps: ParameterSet) -> float:
    return ps.logQ / (ps.L + 1) / 8


def limb_size(ps: ParameterSet) -> float:
    return ps.N * coeff_size(ps)


def ct_size(ps: ParameterSet, level: int | None = None) -> float:
    """``B_Ct`` at ``level``: two polynomials of ``level + 1`` limbs."""
    level = ps.L if level is None else level
    if not 0 <= level <= ps.L:
        raise ValueError(f"level {level} outside [0, {ps.L}]")
    return 2 * (level + 1) * limb_size(ps)


def evk_size(ps: ParameterSet, level: int | None = None) -> float:
    """``beta`` rows of two polynomials over ``level + k + 1`` limbs."""
    level = ps.L if level is None else level
    return 2 * ps.beta * (level + ps.k + 1) * limb_size(ps)


@dataclass(frozen=True)
class CostReport:
    set: str
    level: int
    B_coeff: float
    B_limb: float
    B_Ct: float
    B_evk: float
    M_KeySwitch: float
    M_Rot: float
    M_HLT_s1: float
    M_HLT_s2: float
    M_HE_MM: float
    M_MO_HLT: float

    def as_dict(self) -> dict:
        return asdict(self)


def mem_requirements(ps: ParameterSet) -> CostReport:
    limb = limb_size(ps)
    ct = ct_size(ps)
    # each of the beta raised digits spans the L+k+1 limbs of P*Q_L
    keyswitch = ct + ps.beta * (ps.L + ps.k + 1) * limb
    rot = keyswitch + 1.5 * ct
    s1 = rot + 3 * ct
    s2 = rot + 4 * ct
    return CostReport(
        set=ps.name,
        level=ps.L,
        B_coeff=coeff_size(ps),
        B_limb=limb,
        B_Ct=ct,
        B_evk=evk_size(ps),
        M_KeySwitch=keyswitch,
        M_Rot=rot,
        M_HLT_s1=s1,
        M_HLT_s2=s2,
        M_HE_MM=s2 + ct,
        M_MO_HLT=ct + (ps.beta + 1) * limb,
    )


# ---------------------------------------------------------------------------
# traffic


@dataclass(frozen=True)
class TrafficReport:
    set: str
    dims: str
    kind: str
    d: int
    schedule: str
    sram_budget_bytes: float
    ct_offchip_bytes: float
    aux_offchip_bytes: float
    partial_fusion: bool = False
    breakdown: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = asdict(self)
        if math.isinf(self.sram_budget_bytes):
            out["sram_budget_bytes"] = "inf"
        return out


def _coarse_steps(ps: ParameterSet, level: int):
    """``(name, operand bytes, live bytes)`` for one rotation of the coarse loop."""
    limb = limb_size(ps)
    ct = ct_size(ps, level)
    half = ct / 2
    ext = (level + ps.k + 1) * limb
    raised = ps.beta * ext
    resident = 2 * ct  # input ciphertext and accumulator
    return [
        ("Automorph", 2 * ct, resident + ct),
        ("iNTT", 2 * half, resident + ct + half),
        ("ModUp", half + raised, resident + half + half + raised),
        ("KeyIP", raised + 2 * ext, resident + half + raised + 2 * ext),
        ("iNTT-ModDown", 4 * ext, resident + half + 2 * ext),
        ("ModDown", 2 * ext + ct, resident + half + 2 * ext + ct),
        ("NTT", 2 * ct, resident + half + ct),
        ("Add", 3 * half, resident + ct),
        ("CMult+Add", 3 * ct, resident + ct),
    ]


def traffic_estimate(
    ps: ParameterSet,
    dims: MatrixDims,
    schedule: str,
    sram_budget: float,
    kind: TransformKind = SIGMA,
    level: int | None = None,
) -> TrafficReport:
    """Off-chip bytes of one HLT with ``d = diag_count(kind, dims)`` rotations."""
    if not sram_budget > 0:
        raise ValueError("SRAM budget must be positive")
    if schedule not in SCHEDULES:
        raise ValueError(f"unknown schedule {schedule!r}; use one of {', '.join(SCHEDULES)}")
    level = ps.L if level is None else level
    if level < 1:
        raise ValueError("an HLT needs level >= 1")
    d = diag_count(kind, dims)
    limb = limb_size(ps)
    ct_in, ct_out = ct_size(ps, level), ct_size(ps, level - 1)
    ext = (level + ps.k + 1) * limb
    breakdown = {"input": ct_in, "output": ct_out}
    partial = False

    if schedule == COARSE:
        for name, operands, live in _coarse_steps(ps, level):
            if live > sram_budget:
                breakdown[name] = breakdown.get(name, 0.0) + d * operands
        if 2 * ct_in + ct_out > sram_budget:
            breakdown["Rescale"] = ct_in + ct_out
        pt_bytes = d * ct_in / 2
    else:
        mo = ct_in + (ps.beta + 1) * limb
        if sram_budget < mo + 2 * ps.k * limb:
            # the accumulator's P limbs leave the chip before the merged drop
            breakdown["ModDown-spill"] = 4 * ps.k * limb
        if sram_budget < mo:
            partial = True
            breakdown["unfused"] = 2 * (ps.beta + 1) * ext
        pt_bytes = d * ext
    aux = d * evk_size(ps, level) + pt_bytes
    return TrafficReport(
        set=ps.name,
        dims=dims.label,
        kind=str(kind),
        d=d,
        schedule=schedule,
        sram_budget_bytes=float(sram_budget),
        ct_offchip_bytes=float(sum(breakdown.values())),
        aux_offchip_bytes=float(aux),
        partial_fusion=partial,
        breakdown=breakdown,
    )


def probe_traffic(probe: CountingProbe) -> dict:
    """Measured runtime traffic split the same way as :class:`TrafficReport`."""
    ct = probe.traffic("ct")
    aux = sum(probe.reads.values()) + sum(probe.writes.values()) - ct
    return {"ct_offchip_bytes": ct, "aux_offchip_bytes": aux}


# ---------------------------------------------------------------------------
# serialisation


def _flat(record) -> dict:
    data = record.as_dict() if hasattr(record, "as_dict") else dict(record)
    out = {}
    for key, value in data.items():
        if isinstance(value, dict):
            for sub, v in value.items():
                out[f"{key}.{sub}"] = v
        else:
            out[key] = value
    return out


def to_json(records) -> str:
    if not isinstance(records, list):
        records = [records]
    data = [r.as_dict() if hasattr(r, "as_dict") else r for r in records]
    return json.dumps(data if len(data) != 1 else data[0], indent=2, sort_keys=False)


def to_csv(records) -> str:
    if not isinstance(records, list):
        records = [records]
    rows = [_flat(r) for r in records]
    fields: list[str] = []
    for row in rows:
        fields += [k for k in row if k not in fields]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
