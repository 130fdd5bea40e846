from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hemm import ckks
from hemm import poly as rp
from hemm.ckks import LevelError, MissingKey, Plaintext
from hemm.hlt import HltPlan, Mode, diag_ip, hlt_baseline, hlt_hoisted, run_hlt
from hemm.probe import CountingProbe
from hemm.transform import SIGMA, TAU, DiagonalSet, MatrixDims, epsilon, extract_diagonals, omega

SLOTS = 32
SCALE = 2.0**35


@pytest.fixture(scope="module")
def allkeys(chain64, keys64):
    sk, _ = keys64
    return ckks.gen_keyset(sk, range(1, SLOTS), seed=5)


def enc(chain, pk, values, level=None, seed=0):
    level = chain.L if level is None else level
    return ckks.encrypt_values(values, SCALE, pk, chain, level, np.random.default_rng(seed))


def custom_set(diagonals):
    return DiagonalSet(SLOTS, SIGMA, MatrixDims(1, 1, 1), tuple(diagonals))


@pytest.mark.parametrize("mode", list(Mode))
def test_identity_plan(chain64, keys64, allkeys, mode):
    sk, pk = keys64
    v = np.random.default_rng(0).uniform(-1, 1, SLOTS)
    plan = HltPlan.build(custom_set([(0, np.ones(SLOTS))]), allkeys, mode)
    ct = enc(chain64, pk, v)
    out = run_hlt(ct, plan)
    assert np.abs(ckks.decrypt_values(out, sk) - v).max() < 1e-4
    assert out.level == ct.level - 1 and out.scale == ct.scale


@pytest.mark.parametrize("mode", list(Mode))
def test_sigma_plan_matches_dense(chain64, keys64, allkeys, mode):
    sk, pk = keys64
    d = MatrixDims(4, 3, 5)
    ds = extract_diagonals(SIGMA, d, SLOTS)
    v = np.zeros(SLOTS)
    v[:12] = np.random.default_rng(1).uniform(-1, 1, 12)
    out = run_hlt(enc(chain64, pk, v), HltPlan.build(ds, allkeys, mode))
    assert np.abs(ckks.decrypt_values(out, sk) - ds.apply(v)).max() < 1e-3


def test_empty_plan_rejected():
    with pytest.raises(ValueError):
        custom_set([])


def test_missing_key(chain64, keys64):
    sk, _ = keys64
    keys = ckks.gen_keyset(sk, [1], seed=2, mult=False)
    ds = custom_set([(0, np.ones(SLOTS)), (1, np.ones(SLOTS)), (3, np.ones(SLOTS))])
    with pytest.raises(MissingKey):
        HltPlan.build(ds, keys)
    with pytest.raises(MissingKey):
        HltPlan(ds, {1: keys.rotation(1)})


@st.composite
def random_sets(draw):
    zs = sorted(draw(st.sets(st.integers(0, SLOTS - 1), min_size=1, max_size=6)))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return [(z, rng.uniform(-1, 1, SLOTS)) for z in zs], seed


@given(random_sets())
def test_hoisted_matches_baseline(chain64, keys64, allkeys, case):
    sk, pk = keys64
    diagonals, seed = case
    ds = custom_set(diagonals)
    v = np.random.default_rng(seed + 1).uniform(-1, 1, SLOTS)
    ct = enc(chain64, pk, v, seed=seed)
    base = hlt_baseline(ct, HltPlan.build(ds, allkeys, Mode.BASELINE))
    hoist = hlt_hoisted(ct, HltPlan.build(ds, allkeys, Mode.HOISTED))
    got_b, got_h = ckks.decrypt_values(base, sk), ckks.decrypt_values(hoist, sk)
    assert np.abs(got_b - got_h).max() < 1e-4
    assert np.abs(got_h - ds.apply(v)).max() < 1e-4
    assert base.level == hoist.level and base.scale == hoist.scale


@pytest.mark.parametrize("kind", [SIGMA, TAU, epsilon(1), omega(2)], ids=str)
def test_kinds_agree_across_modes(chain64, keys64, allkeys, kind):
    sk, pk = keys64
    d = MatrixDims(4, 3, 5)
    ds = extract_diagonals(kind, d, SLOTS)
    v = np.random.default_rng(3).uniform(-1, 1, SLOTS)
    ct = enc(chain64, pk, v)
    outs = [ckks.decrypt_values(run_hlt(ct, HltPlan.build(ds, allkeys, m)), sk) for m in Mode]
    assert np.abs(outs[0] - outs[1]).max() < 1e-4


def test_hoisted_subop_counts(chain64, keys64, allkeys):
    _, pk = keys64
    ds = custom_set([(0, np.ones(SLOTS)), (2, np.ones(SLOTS)), (5, np.ones(SLOTS))])
    probe = CountingProbe()
    hlt_hoisted(enc(chain64, pk, np.ones(SLOTS)), HltPlan.build(ds, allkeys), probe)
    assert probe.subops["Decomp"] == 1
    assert probe.subops["ModUp"] == chain64.beta + 1
    assert probe.subops["KeyIP"] == 2
    assert probe.subops["ModDown+Rescale"] == 2
    # only the input read and output write leave the fused region
    assert probe.reads["ct"] > 0 and probe.writes["ct"] > 0


def test_hoisted_counts_two_digits(chain_b2):
    sk, pk = ckks.keygen(chain_b2, 3)
    keys = ckks.gen_keyset(sk, [1, 4], seed=4, mult=False)
    ds = custom_set([(1, np.ones(SLOTS)), (4, np.full(SLOTS, 0.5))])
    v = np.random.default_rng(5).uniform(-1, 1, SLOTS)
    ct = ckks.encrypt_values(v, 2.0**30, pk, chain_b2, chain_b2.L, np.random.default_rng(6))
    probe = CountingProbe()
    out = hlt_hoisted(ct, HltPlan.build(ds, keys), probe)
    assert probe.subops["ModUp"] == 3 and probe.subops["KeyIP"] == 2
    assert np.abs(ckks.decrypt_values(out, sk) - ds.apply(v)).max() < 1e-3


def _pair(chain, ct, key, z):
    level = ct.level
    raised = [ckks.modup(d, level) for d in ckks.decomp(ct.b, level)]
    pair = ckks.keyip([rp.automorph(r, z) for r in raised], key)
    return pair, rp.automorph(ckks.p_embed(ct.a, level), z)


def _ext_mask(chain, values, level):
    return ckks.encode(values, chain.moduli[level].q, chain, level, extended=True)


def test_diag_ip_zero_mask_is_identity(chain64, keys64, allkeys):
    _, pk = keys64
    ct = enc(chain64, pk, np.ones(SLOTS))
    pair, a_rot = _pair(chain64, ct, allkeys.rotation(3), 3)
    acc = diag_ip(None, pair, a_rot, _ext_mask(chain64, np.ones(SLOTS), ct.level))
    again = diag_ip(acc, pair, a_rot, _ext_mask(chain64, np.zeros(SLOTS), ct.level))
    assert all(np.array_equal(x.coeffs, y.coeffs) for x, y in zip(acc, again))


def test_diag_ip_single_matches_rot_cmult(chain64, keys64, allkeys):
    sk, pk = keys64
    v = np.random.default_rng(7).uniform(-1, 1, SLOTS)
    mask = np.random.default_rng(8).uniform(-1, 1, SLOTS)
    ct = enc(chain64, pk, v)
    level, q = ct.level, chain64.moduli[ct.level].q
    pair, a_rot = _pair(chain64, ct, allkeys.rotation(3), 3)
    acc = diag_ip(None, pair, a_rot, _ext_mask(chain64, mask, level))
    fused = ckks.Ciphertext(
        ckks.moddown_rescale(acc[0], level), ckks.moddown_rescale(acc[1], level), level - 1, ct.scale
    )
    pt = ckks.encode(mask, q, chain64, level)
    ref = ckks.rescale(ckks.cmult(ckks.rot(ct, 3, allkeys.rotation(3)), pt))
    assert np.abs(ckks.decrypt_values(fused, sk) - ckks.decrypt_values(ref, sk)).max() < 1e-4
    assert np.abs(ckks.decrypt_values(fused, sk) - mask * np.roll(v, -3)).max() < 1e-4


def test_diag_ip_linear_in_mask(chain64, keys64, allkeys):
    _, pk = keys64
    ct = enc(chain64, pk, np.random.default_rng(9).uniform(-1, 1, SLOTS))
    pair, a_rot = _pair(chain64, ct, allkeys.rotation(1), 1)
    rng = np.random.default_rng(10)
    m1 = _ext_mask(chain64, rng.uniform(-1, 1, SLOTS), ct.level)
    m2 = _ext_mask(chain64, rng.uniform(-1, 1, SLOTS), ct.level)
    m12 = Plaintext(rp.add(m1.poly, m2.poly), m1.scale, m1.level)
    x1 = diag_ip(None, pair, a_rot, m1)
    both = diag_ip(x1, pair, a_rot, m2)
    direct = diag_ip(None, pair, a_rot, m12)
    assert all(np.array_equal(x.coeffs, y.coeffs) for x, y in zip(both, direct))


@pytest.mark.parametrize("mode", list(Mode))
def test_level_contract(chain64, keys64, allkeys, mode):
    _, pk = keys64
    plan = HltPlan.build(custom_set([(0, np.ones(SLOTS)), (1, np.ones(SLOTS))]), allkeys, mode)
    for level in (4, 2, 1):
        out = run_hlt(enc(chain64, pk, np.ones(SLOTS), level=level), plan)
        assert out.level == level - 1 and out.scale == SCALE
    with pytest.raises(LevelError):
        run_hlt(enc(chain64, pk, np.ones(SLOTS), level=0), plan)
