"""Parameter-set and benchmark registries, plus size-unit parsing."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache

from .rns import ModulusChain, generate_chain, split_bits
from .transform import MatrixDims, runtime_degree, shape_type


class UnknownSet(KeyError):
    def __str__(self):
        return f"unknown parameter set {self.args[0]!r}; known: {', '.join(known_sets())}"


@dataclass(frozen=True)
class ParameterSet:
    """One HE parameter set as used by the cost model and, optionally, at runtime.

    ``q_bits``/``p_bits`` are the runtime limb sizes.  ``logQ``, ``L``, ``k``
    and ``beta`` describe the set for the analytical model; ``p_bits`` may be
    wider than ``k`` limbs to keep key-switching noise small at runtime.
    """

    name: str
    N: int
    logQ: int
    L: int
    k: int
    beta: int
    lam: int = 0
    q_bits: tuple[int, ...] = ()
    p_bits: tuple[int, ...] = ()
    scale_bits: int = 40
    notes: str = field(default="", compare=False)

    def __post_init__(self):
        if self.N < 2 or self.N & (self.N - 1):
            raise ValueError(f"{self.name}: N={self.N} is not a power of two")
        if self.L < 0 or self.k < 0 or self.logQ <= 0:
            raise ValueError(f"{self.name}: L, k and logQ must be nonnegative")
        if not 0 <= self.beta <= self.L + 1:
            raise ValueError(f"{self.name}: beta={self.beta} outside [0, L+1]")
        if self.q_bits and len(self.q_bits) != self.L + 1:
            raise ValueError(f"{self.name}: {len(self.q_bits)} q limbs but L={self.L}")

    @property
    def scale(self) -> float:
        return 2.0**self.scale_bits

    @property
    def runtime_q_bits(self) -> tuple[int, ...]:
        return self.q_bits or tuple(split_bits(self.logQ, self.L + 1))

    @property
    def runtime_p_bits(self) -> tuple[int, ...]:
        return self.p_bits or (54,) * self.k

    def chain(self, ring_degree: int | None = None) -> ModulusChain:
        return _chain(self.runtime_q_bits, self.runtime_p_bits, self.beta, ring_degree or self.N)

    def with_degree(self, ring_degree: int) -> "ParameterSet":
        return ParameterSet(
            self.name, ring_degree, self.logQ, self.L, self.k, self.beta, self.lam,
            self.q_bits, self.p_bits, self.scale_bits, self.notes,
        )

    @classmethod
    def from_config(cls, cfg: dict) -> "ParameterSet":
        """User-defined set from per-limb bit lists: ``{name, N, q_bits, p_bits, beta}``."""
        try:
            q_bits = tuple(int(b) for b in cfg["q_bits"])
            p_bits = tuple(int(b) for b in cfg.get("p_bits", ()))
            return cls(
                name=str(cfg["name"]),
                N=int(cfg["N"]),
                logQ=sum(q_bits),
                L=len(q_bits) - 1,
                k=int(cfg.get("k", len(p_bits))),
                beta=int(cfg.get("beta", 1)),
                lam=int(cfg.get("lambda", 0)),
                q_bits=q_bits,
                p_bits=p_bits,
                scale_bits=int(cfg.get("scale_bits", 40)),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed parameter-set config: {exc}") from None


@lru_cache(maxsize=16)
def _chain(q_bits, p_bits, beta, ring_degree) -> ModulusChain:
    return generate_chain(ring_degree, list(q_bits), list(p_bits), beta)


# Runtime limbs for Set-A shapes: five limbs summing to log Q = 218, and a
# 224-bit P so that one digit of key switching stays below the scale.
_SET_A_Q = (44, 44, 44, 43, 43)
_SET_A_P = (56, 56, 56, 56)

PARAMETER_SETS: dict[str, ParameterSet] = {
    "set-a": ParameterSet("set-a", 2**13, 218, 4, 1, 1, 80, _SET_A_Q, _SET_A_P, 35,
                          "runtime P widened to four 56-bit limbs"),
    "set-b": ParameterSet("set-b", 2**15, 855, 15, 8, 2, 128, scale_bits=40),
    "set-c": ParameterSet("set-c", 2**16, 1693, 31, 12, 3, 128, scale_bits=40),
}

# Shape of Set-A with the ring degree chosen per matrix size.
SET_A_LIKE = ParameterSet("set-a-like", 2**13, 218, 4, 1, 1, 0, _SET_A_Q, _SET_A_P, 35)
MIN_DESK_DEGREE = 16


def get_set(name: str, dims: MatrixDims | None = None) -> ParameterSet:
    """Look up a set; ``set-a-like`` takes its degree from ``dims``."""
    if name == "set-a-like":
        if dims is None:
            return SET_A_LIKE
        return SET_A_LIKE.with_degree(max(MIN_DESK_DEGREE, runtime_degree(dims)))
    try:
        return PARAMETER_SETS[name]
    except KeyError:
        raise UnknownSet(name) from None


def known_sets() -> list[str]:
    return sorted(PARAMETER_SETS) + ["set-a-like"]


# ---------------------------------------------------------------------------
# benchmarks

TABLE3 = {
    "set-a": ("64-64-16", "64-16-64", "16-64-64", "64-64-64"),
    "set-b": ("128-128-16", "128-16-128", "16-128-128", "128-128-128"),
    "set-c": ("160-160-16", "160-16-160", "16-160-160", "160-160-160"),
}


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    dims: MatrixDims
    set_name: str
    mode: str = "hoisted"
    seed: int = 0
    analysis_only: bool = False

    @property
    def shape(self) -> str:
        return shape_type(self.dims)

    def check(self):
        ps = get_set(self.set_name, self.dims)
        self.dims.check_slots(ps.N // 2)
        if self.mode not in ("baseline", "hoisted"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @classmethod
    def from_config(cls, cfg: dict, default_seed: int = 0) -> "BenchmarkSpec":
        try:
            dims = MatrixDims.parse(str(cfg["dims"]))
            return cls(
                name=str(cfg.get("name", dims.label)),
                dims=dims,
                set_name=str(cfg["set"]),
                mode=str(cfg.get("mode", "hoisted")),
                seed=int(cfg.get("seed", default_seed)),
                analysis_only=bool(cfg.get("analysis_only", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed benchmark entry {cfg!r}: {exc}") from None


def table3_specs() -> list[BenchmarkSpec]:
    return [
        BenchmarkSpec(label, MatrixDims.parse(label), set_name, analysis_only=True)
        for set_name, labels in TABLE3.items()
        for label in labels
    ]


# ---------------------------------------------------------------------------
# sizes

_UNITS = {"": 1, "b": 1, "k": 1024, "kb": 1024, "kib": 1024, "m": 1024**2, "mb": 1024**2,
          "mib": 1024**2, "g": 1024**3, "gb": 1024**3, "gib": 1024**3}

SRAM_PRESETS = {"cpu-24mb": 24 * 1024**2, "llc-32mb": 32 * 1024**2, "u280-43mb": 43 * 1024**2}


def parse_size(text: str | int | float) -> float:
    """Bytes from ``43MB``, ``1.5GiB``, ``512`` or ``inf``; units are powers of 1024."""
    if isinstance(text, (int, float)):
        return float(text)
    s = text.strip().lower()
    if s in SRAM_PRESETS:
        return float(SRAM_PRESETS[s])
    if s in ("inf", "infinity", "unlimited"):
        return math.inf
    m = re.fullmatch(r"([0-9]*\.?[0-9]+(?:e[+-]?[0-9]+)?)\s*([a-z]*)", s)
    if not m or m.group(2) not in _UNITS:
        raise ValueError(f"cannot parse size {text!r}")
    return float(m.group(1)) * _UNITS[m.group(2)]


def format_size(nbytes: float) -> str:
    if math.isinf(nbytes):
        return "inf"
    for unit, size in (("GB", 1024**3), ("MB", 1024**2), ("KB", 1024)):
        if nbytes >= size:
            return f"{nbytes / size:.2f} {unit}"
    return f"{nbytes:.0f} B"

