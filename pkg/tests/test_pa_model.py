import json
import pickle
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pacfi.pa import (
    AuthFault,
    BranchOutcome,
    KeyRole,
    NonCanonicalPointer,
    PaKey,
    PointerLayout,
    Provenance,
    SignedPointer,
    branch_to,
    compute_pac,
    invert_key,
    pac_auth,
    pac_sign,
    xpac_strip,
)
from pacfi.pa.siphash import prf64, prf64_batch, siphash24
from pacfi.serialize import KeyMaterialError, dumps

LAYOUT = PointerLayout()
USER_PTR = 0x0000_7FFF_0000_1000
KERNEL_PTR = 0xFFFF_8000_1008_1000


def _load(name):
    return json.loads(resources.files("pacfi").joinpath("data", name).read_text())


def test_siphash_reference_vectors():
    vectors = _load("siphash_vectors.json")
    key = int.from_bytes(bytes.fromhex(vectors["key"]), "little")
    for n, expected in enumerate(vectors["digests_u64"]):
        assert siphash24(key, bytes(range(n))) == int(expected, 16), n
    # first and sixteenth entries of the SipHash-2-4 reference vectors
    assert int(vectors["digests_u64"][0], 16) == 0x726FDB47DD0E0E31
    assert int(vectors["digests_u64"][15], 16) == 0xA129CA6149BE45E5


def test_prf64_matches_generic_siphash():
    key = PaKey.from_seed(3)._material
    for a, b in [(0, 0), (USER_PTR, 0x42), (2**64 - 1, 12345)]:
        msg = a.to_bytes(8, "little") + b.to_bytes(8, "little")
        assert prf64(key, a, b) == siphash24(key, msg)


def test_prf64_batch_matches_scalar():
    key = PaKey.from_seed(5)._material
    rng = np.random.default_rng(0)
    a = rng.integers(0, 2**63, size=200, dtype=np.uint64)
    b = rng.integers(0, 2**63, size=200, dtype=np.uint64)
    out = prf64_batch(key, a, b)
    assert [int(x) for x in out] == [prf64(key, int(x), int(y)) for x, y in zip(a, b)]


@pytest.mark.parametrize("case", _load("pac_golden.json")["cases"], ids=lambda c: f"{c['role']}-{c['ptr']}")
def test_golden_sign(case):
    key = PaKey.from_seed(case["key_seed"], KeyRole(case["role"]))
    sp = pac_sign(int(case["ptr"], 16), int(case["ctx"], 16), key)
    assert sp.value == int(case["signed"], 16)
    assert compute_pac(int(case["ptr"], 16), int(case["ctx"], 16), key) == case["pac"]


def test_layout_default_has_fifteen_pac_bits_skipping_selector():
    assert LAYOUT.pac_positions == tuple(range(48, 55)) + tuple(range(56, 64))
    assert LAYOUT.pac_mask & (1 << 55) == 0
    assert LAYOUT.pac_mask & LAYOUT.error_mask == LAYOUT.error_mask


@pytest.mark.parametrize("va, pac", [(48, 16), (56, 4), (31, 4), (52, 12)])
def test_layout_rejects_bad_geometry(va, pac):
    with pytest.raises(ValueError):
        PointerLayout(va_bits=va, pac_bits=pac)


def test_canonical_forms():
    assert LAYOUT.is_canonical(USER_PTR)
    assert LAYOUT.is_canonical(KERNEL_PTR)
    assert not LAYOUT.is_canonical(USER_PTR | (1 << 50))
    assert not LAYOUT.is_canonical(0x0000_8000_0000_0000)


def test_sign_then_auth_round_trip():
    key = PaKey.from_seed(1)
    for ptr in (USER_PTR, KERNEL_PTR):
        sp = pac_sign(ptr, 0x42, key)
        assert sp.provenance is Provenance.SIGNED
        assert sp.value & ((1 << 48) - 1) == ptr & ((1 << 48) - 1)
        out = pac_auth(sp, 0x42, key)
        assert out == SignedPointer.raw(ptr)


def test_zero_context_equals_paciza_form():
    key = PaKey.from_seed(1, KeyRole.APIA)
    # paciza signs with a zero modifier; the model has no separate entry point
    assert pac_sign(USER_PTR, 0, key).value == LAYOUT.deposit_pac(USER_PTR, compute_pac(USER_PTR, 0, key))


def test_sign_rejects_non_canonical_and_signed_input():
    key = PaKey.from_seed(1)
    with pytest.raises(NonCanonicalPointer):
        pac_sign(USER_PTR | (1 << 60), 0, key)
    signed = pac_sign(USER_PTR, 0, key)
    with pytest.raises(NonCanonicalPointer):
        pac_sign(signed, 0, key)


def test_wrong_context_sets_error_and_faults_later():
    key = PaKey.from_seed(1)
    sp = pac_sign(KERNEL_PTR, 1, key)
    bad = pac_auth(sp, 2, key)
    assert compute_pac(KERNEL_PTR, 1, key) != compute_pac(KERNEL_PTR, 2, key)
    assert bad.provenance is Provenance.ERROR
    assert (bad.value >> 61) & 0b11 == 0b10  # key B error code
    assert not LAYOUT.is_canonical(bad.value)
    assert branch_to(bad) is BranchOutcome.FAULT


def test_error_code_for_a_key_on_user_pointer():
    key = PaKey.from_seed(1, KeyRole.APIA)
    sp = pac_sign(USER_PTR, 1, key)
    bad = pac_auth(sp, 99, key)
    assert bad.value == USER_PTR | (0b01 << 61)


def test_replay_at_other_site_with_same_context_succeeds():
    key = PaKey.from_seed(9)
    leaked = pac_sign(KERNEL_PTR, 0x77, key)
    # a different USE site, same context and key: authentication passes
    assert branch_to(pac_auth(leaked, 0x77, key)) is BranchOutcome.OK


def test_fpac_traps_at_auth():
    layout = PointerLayout(fpac=True)
    key = PaKey.from_seed(1)
    sp = pac_sign(USER_PTR, 1, key, layout)
    with pytest.raises(AuthFault):
        pac_auth(sp, 2, key, layout)


def test_enhanced_pac2_round_trip_and_mismatch():
    layout = PointerLayout(enhanced_pac2=True)
    key = PaKey.from_seed(4)
    sp = pac_sign(KERNEL_PTR, 5, key, layout)
    expected_field = layout.extract_pac(KERNEL_PTR) ^ compute_pac(KERNEL_PTR, 5, key, layout)
    assert layout.extract_pac(sp.value) == expected_field
    assert pac_auth(sp, 5, key, layout).value == KERNEL_PTR
    assert pac_auth(sp, 6, key, layout).provenance is Provenance.ERROR


def test_strip_cases():
    key = PaKey.from_seed(2)
    sp = pac_sign(KERNEL_PTR, 3, key)
    assert xpac_strip(sp) == SignedPointer.raw(KERNEL_PTR)
    assert xpac_strip(SignedPointer.raw(USER_PTR)).value == USER_PTR
    bad = pac_auth(sp, 4, key)
    # bit-mask oracle: clear everything above bit 47, then re-extend from bit 55
    low = bad.value & ((1 << 48) - 1)
    oracle = low | (0xFFFF << 48 if (bad.value >> 55) & 1 else 0)
    assert xpac_strip(bad).value == oracle == KERNEL_PTR


def test_branch_to_cases():
    key = PaKey.from_seed(2)
    assert branch_to(SignedPointer.raw(USER_PTR)) is BranchOutcome.OK
    sp = pac_sign(USER_PTR, 3, key)
    assert LAYOUT.extract_pac(sp.value) != 0
    assert branch_to(sp) is BranchOutcome.FAULT


def test_invert_key():
    key = PaKey.from_seed(8)
    assert invert_key(invert_key(key)) == key
    inv = invert_key(key)
    assert inv._material == key._material ^ ((1 << 128) - 1)
    sp = pac_sign(KERNEL_PTR, 1, key)
    assert compute_pac(KERNEL_PTR, 1, key) != compute_pac(KERNEL_PTR, 1, inv)
    assert pac_auth(sp, 1, inv).provenance is Provenance.ERROR


def test_key_is_opaque():
    key = PaKey.from_seed(8)
    assert "redacted" in repr(key)
    assert f"{key._material:x}" not in repr(key)
    with pytest.raises(TypeError):
        pickle.dumps(key)
    with pytest.raises(KeyMaterialError):
        dumps({"k": key})
    with pytest.raises(AttributeError):
        key.role = KeyRole.APIA


pointers = st.one_of(
    st.integers(0, (1 << 47) - 1),
    st.integers(0, (1 << 47) - 1).map(lambda v: v | (0xFFFF8 << 44)),
)


@settings(max_examples=300, deadline=None)
@given(ptr=pointers, ctx=st.integers(0, 2**64 - 1), seed=st.integers(0, 2**32))
def test_round_trip_property(ptr, ctx, seed):
    key = PaKey.from_seed(seed)
    assert pac_auth(pac_sign(ptr, ctx, key), ctx, key).value == ptr


@settings(max_examples=300, deadline=None)
@given(value=st.integers(0, 2**64 - 1))
def test_non_canonical_always_faults(value):
    if not LAYOUT.is_canonical(value):
        assert branch_to(value) is BranchOutcome.FAULT
    else:
        assert branch_to(value) is BranchOutcome.OK


def test_collision_rate_matches_pac_width():
    # table-free check on 10^6 samples: P[pac(p,c1) == pac(p,c2)] = 2^-15
    key = PaKey.from_seed(12)._material
    rng = np.random.default_rng(2024)
    n = 1_000_000
    ptr = rng.integers(0, 1 << 47, size=n, dtype=np.uint64)
    c1 = rng.integers(0, 2**63, size=n, dtype=np.uint64)
    c2 = c1 ^ rng.integers(1, 2**63, size=n, dtype=np.uint64)
    mask = np.uint64((1 << 15) - 1)
    hits = int(np.count_nonzero((prf64_batch(key, ptr, c1) & mask) == (prf64_batch(key, ptr, c2) & mask)))
    p = 2.0**-15
    sigma = (n * p * (1 - p)) ** 0.5
    assert abs(hits - n * p) <= 3 * sigma
