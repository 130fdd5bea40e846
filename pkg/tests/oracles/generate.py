"""Regenerate ``frozen.json`` from slow, library-independent reference code.

Run ``python tests/oracles/generate.py``; nothing here imports ``hemm``.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

OUT = Path(__file__).with_name("frozen.json")


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
    for p in small:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d, s = d // 2, s + 1
    for a in small:  # deterministic below 3.3e24
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def scan_chain(n: int, bits: list[int]) -> list[int]:
    chosen: list[int] = []
    for b in bits:
        c = 1 << (b - 1)
        while c % (2 * n) != 1:
            c += 1
        while c in chosen or not is_prime(c):
            c += 2 * n
        chosen.append(c)
    return chosen


def pow2ceil(x: int) -> int:
    p = 1
    while p < x:
        p *= 2
    return p


def select_degree(m, l, n):
    return max(pow2ceil(2 * m * l), pow2ceil(2 * n * l))


def closed_forms(m, l, n):
    return {
        "sigma": 2 * min(m, l) - 1,
        "tau": 2 * min(n, l) - 1,
        "epsilon": n // l + 1,
        "omega": 2 if m == l else n * (m // l + 2),
    }


def ledger(m, l, n):
    d = closed_forms(m, l, n)
    phi = d["sigma"] + d["tau"]
    zeta = l * (d["epsilon"] + d["omega"])
    return {"Add": phi + zeta + l, "Mult": l, "CMult": phi + zeta, "Rot": phi + zeta}


def ones(kind, k, m, l, n):
    """(row, col) of every 1, written straight from the index definitions."""
    out = []
    if kind == "sigma":
        for i in range(m):
            for j in range(l):
                out.append((i + j * m, i + ((i + j) % l) * m))
    elif kind == "tau":
        for i in range(l):
            for j in range(n):
                out.append((i + j * l, (i + j) % l + j * l))
    elif kind == "epsilon":
        for i in range(m * n):
            out.append((i, (k * m + i) % (m * l)))
    else:
        for i in range(m * n):
            out.append((i, (k + i % m) % l + (i // m) * l))
    return out


def rect_count(kind, k, m, l, n):
    return len({c - r for r, c in ones(kind, k, m, l, n)})


def cost(name, n, log_q, big_l, k, beta):
    limb = Fraction(n * log_q, (big_l + 1) * 8)
    ct = 2 * (big_l + 1) * limb
    ks = ct + beta * (big_l + k + 1) * limb
    rot = ks + Fraction(3, 2) * ct
    s2 = rot + 4 * ct
    return {
        "B_limb": float(limb),
        "B_Ct": float(ct),
        "B_evk": float(2 * beta * (big_l + k + 1) * limb),
        "M_KeySwitch": float(ks),
        "M_Rot": float(rot),
        "M_HLT_s1": float(rot + 3 * ct),
        "M_HLT_s2": float(s2),
        "M_HE_MM": float(s2 + ct),
        "M_MO_HLT": float(ct + (beta + 1) * limb),
    }


def main():
    frozen = {
        "set_a_chain": scan_chain(2**13, [44, 44, 44, 43, 43, 56, 56, 56, 56]),
        "select_degree": {
            "4-3-5": select_degree(4, 3, 5),
            "64-64-64": select_degree(64, 64, 64),
            "1-1-1": select_degree(1, 1, 1),
        },
        "closed_forms": {
            "4-3-5": closed_forms(4, 3, 5),
            "64-64-64": closed_forms(64, 64, 64),
        },
        "rect_counts_4_3_5": {
            kind: [rect_count(kind, k, 4, 3, 5) for k in range(3 if kind in ("epsilon", "omega") else 1)]
            for kind in ("sigma", "tau", "epsilon", "omega")
        },
        "ledger": {d: ledger(*map(int, d.split("-"))) for d in ("64-64-64", "4-3-5", "1-1-1")},
        "cost": {
            "set-a": cost("set-a", 2**13, 218, 4, 1, 1),
            "set-b": cost("set-b", 2**15, 855, 15, 8, 2),
            "set-c": cost("set-c", 2**16, 1693, 31, 12, 3),
        },
    }
    OUT.write_text(json.dumps(frozen, indent=2) + "\n")


if __name__ == "__main__":
    main()
