"""Binary dump/load of polynomials, ciphertexts, plaintexts and evaluation keys.

Polynomial record (little-endian)::

    "HEMM" | version u8 | N u32 | limb_count u16 | domain u8
    per limb: q u64 | N x u64 residues

Objects prefix their polynomials with ``type u8 | level u16 | scale f64 | beta u16``;
evaluation keys add ``rotation i32`` (``-1`` for the relinearisation key).
"""

from __future__ import annotations

import io
import struct
from typing import BinaryIO

import numpy as np

from .ckks import Ciphertext, EvalKey, Plaintext
from .poly import Domain, RingPoly
from .rns import ModulusChain

MAGIC = b"HEMM"
VERSION = 1
_POLY_HEADER = struct.Struct("<4sBIHB")
_OBJ_HEADER = struct.Struct("<BHdH")
_ROTATION = struct.Struct("<i")

PLAINTEXT, CIPHERTEXT, EVALKEY = 1, 2, 3


class FormatError(ValueError):
    pass


def write_poly(out: BinaryIO, p: RingPoly):
    out.write(_POLY_HEADER.pack(MAGIC, VERSION, p.n, len(p.limbs), int(p.domain)))
    values = p.chain.values
    for limb, row in zip(p.limbs, p.coeffs):
        out.write(struct.pack("<Q", values[limb]))
        out.write(row.astype("<u8").tobytes())


def _read(src: BinaryIO, size: int) -> bytes:
    data = src.read(size)
    if len(data) != size:
        raise FormatError("truncated record")
    return data


def read_poly(src: BinaryIO, chain: ModulusChain) -> RingPoly:
    magic, version, n, count, domain = _POLY_HEADER.unpack(_read(src, _POLY_HEADER.size))
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if n != chain.ring_degree:
        raise FormatError(f"record has N={n}, chain has N={chain.ring_degree}")
    index = {q: i for i, q in enumerate(chain.values)}
    limbs, rows = [], []
    for _ in range(count):
        (q,) = struct.unpack("<Q", _read(src, 8))
        if q not in index:
            raise FormatError(f"modulus {q} is not in the chain")
        limbs.append(index[q])
        rows.append(np.frombuffer(_read(src, 8 * n), dtype="<u8").astype(np.int64))
    return RingPoly(chain, tuple(limbs), np.array(rows, dtype=np.int64), Domain(domain))


def _header(out, kind, level, scale, beta):
    out.write(_OBJ_HEADER.pack(kind, level, scale, beta))


def dump(obj, out: BinaryIO):
    if isinstance(obj, Ciphertext):
        _header(out, CIPHERTEXT, obj.level, obj.scale, 0)
        write_poly(out, obj.a)
        write_poly(out, obj.b)
    elif isinstance(obj, Plaintext):
        _header(out, PLAINTEXT, obj.level, obj.scale, 0)
        write_poly(out, obj.poly)
    elif isinstance(obj, EvalKey):
        _header(out, EVALKEY, obj.rows[0][0].chain.L, 1.0, obj.beta)
        out.write(_ROTATION.pack(-1 if obj.purpose == "mult" else int(obj.purpose)))
        for a, b in obj.rows:
            write_poly(out, a)
            write_poly(out, b)
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def load(src: BinaryIO, chain: ModulusChain):
    kind, level, scale, beta = _OBJ_HEADER.unpack(_read(src, _OBJ_HEADER.size))
    if kind == CIPHERTEXT:
        return Ciphertext(read_poly(src, chain), read_poly(src, chain), level, scale)
    if kind == PLAINTEXT:
        return Plaintext(read_poly(src, chain), scale, level)
    if kind == EVALKEY:
        (rotation,) = _ROTATION.unpack(_read(src, _ROTATION.size))
        rows = tuple((read_poly(src, chain), read_poly(src, chain)) for _ in range(beta))
        return EvalKey("mult" if rotation < 0 else rotation, rows)
    raise FormatError(f"unknown object type {kind}")


def dumps(obj) -> bytes:
    buf = io.BytesIO()
    dump(obj, buf)
    return buf.getvalue()


def loads(data: bytes, chain: ModulusChain):
    return load(io.BytesIO(data), chain)
