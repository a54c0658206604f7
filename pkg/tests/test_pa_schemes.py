import itertools

import pytest

from pacfi.pa import (
    BackoffTable,
    BranchOutcome,
    ContextScheme,
    KeyRole,
    KeySplit,
    PaKey,
    PreemptionContext,
    SealedTableError,
    auth_return,
    backoff_gate,
    branch_to,
    chain_sign_context,
    cumulative_delay,
    expected_bruteforce_attempts,
    pac_generic,
    pac_sign,
    return_context,
    sign_context,
    sign_return,
    stable_hash64,
    verify_context,
)

KEY = PaKey.from_seed(21, KeyRole.APIB)
BASE = 0xFFFF_8000_0800_0000


def make_ctx(seed=0):
    regs = [(0x1000 * (i + 1) + seed) & (2**64 - 1) for i in range(31)]
    return PreemptionContext.from_values(BASE, regs, elr=0xFFFF_8000_1000_0040, spsr=0x3C5)


def test_chain_formula_by_hand():
    pc = make_ctx()
    t = 12345
    pac, time_pac = chain_sign_context(pc, t, KEY)
    assert time_pac == pac_sign(BASE, t, KEY).value
    acc = time_pac
    for v in [pc.spsr, pc.elr] + [pc.regs[i] for i in reversed(range(31))]:
        acc = pac_generic(v, acc, KEY)
    assert pac == acc


def test_chain_verifies_unmodified():
    pc = sign_context(make_ctx(), KEY, ContextScheme.TIMEBIND, timestamp=7)
    assert verify_context(pc, KEY, ContextScheme.TIMEBIND, timestamp=7)


@pytest.mark.parametrize("reg", [0, 1, 17, 29, 30])
def test_single_bit_flip_sweep(reg):
    pc = sign_context(make_ctx(), KEY, ContextScheme.TIMEBIND, timestamp=7)
    for bit in range(64):
        tampered = pc.with_reg(reg, pc.regs[reg] ^ (1 << bit))
        assert not verify_context(tampered, KEY, ContextScheme.TIMEBIND, timestamp=7)


def test_special_register_flip_rejected():
    from dataclasses import replace
    pc = sign_context(make_ctx(), KEY, ContextScheme.TIMEBIND, timestamp=7)
    assert not verify_context(replace(pc, elr=pc.elr ^ 4), KEY, ContextScheme.TIMEBIND, timestamp=7)
    assert not verify_context(replace(pc, spsr=pc.spsr ^ 1), KEY, ContextScheme.TIMEBIND, timestamp=7)


def test_whole_context_replay_under_new_timestamp_fails():
    captured = sign_context(make_ctx(), KEY, ContextScheme.TIMEBIND, timestamp=100)
    assert not verify_context(captured, KEY, ContextScheme.TIMEBIND, timestamp=101)


def test_base_chain_replay_is_accepted():
    captured = sign_context(make_ctx(), KEY, ContextScheme.BASE_CHAIN)
    assert verify_context(captured, KEY, ContextScheme.BASE_CHAIN)


def test_chain_is_order_sensitive():
    pc = make_ctx()
    signed = sign_context(pc, KEY, ContextScheme.TIMEBIND, timestamp=3)
    for i, j in itertools.combinations([0, 1, 5, 30], 2):
        regs = list(signed.regs)
        regs[i], regs[j] = regs[j], regs[i]
        swapped = PreemptionContext(tuple(regs), signed.elr, signed.spsr, BASE, signed.pac, signed.time_pac)
        assert not verify_context(swapped, KEY, ContextScheme.TIMEBIND, timestamp=3)


def test_independent_scheme_allows_selective_swap():
    a = sign_context(make_ctx(1), KEY, ContextScheme.INDEPENDENT)
    b = sign_context(make_ctx(2), KEY, ContextScheme.INDEPENDENT)
    # copy register x3 and its pac from context a into b: still verifies
    regs = list(b.regs)
    regs[3] = a.regs[3]
    pacs = list(b.reg_pacs)
    idx = 2 + (30 - 3)
    pacs[idx] = a.reg_pacs[idx]
    mixed = PreemptionContext(tuple(regs), b.elr, b.spsr, BASE, reg_pacs=tuple(pacs))
    assert verify_context(mixed, KEY, ContextScheme.INDEPENDENT)


def test_return_context_bit_layout():
    sp = 0xFFFF_8000_0A0B_0C00
    ctx = return_context(sp, 0xABCD_1234)
    assert ctx >> 48 == 0x1234
    assert ctx & ((1 << 48) - 1) == sp & ((1 << 48) - 1)


def test_return_signing():
    ret = 0xFFFF_8000_1000_2000
    sp = 0xFFFF_8000_0A0B_0C00
    fa, fb = stable_hash64("vfs_read"), stable_hash64("vfs_write")
    signed = sign_return(ret, sp, fa, KEY)
    assert auth_return(signed, sp, fa, KEY).value == ret
    assert branch_to(auth_return(signed, sp, fb, KEY)) is BranchOutcome.FAULT
    assert branch_to(auth_return(signed, sp + 0x40, fa, KEY)) is BranchOutcome.FAULT


def test_key_split_views():
    split = KeySplit(KEY)
    kernel_ptr = split.sign(0xFFFF_8000_1000_0000, 5)
    assert split.kernel_accepts(kernel_ptr, 5)
    split.switch_to_user()
    forged = split.sign(0xFFFF_8000_1000_0000, 5)
    assert forged != kernel_ptr
    assert not split.kernel_accepts(forged, 5)
    assert split.active == KeySplit(KEY)._user


def test_stable_hash_is_stable():
    assert stable_hash64("void (*)(void *)") == stable_hash64("void (*)(void *)")
    assert stable_hash64("a") != stable_hash64("b")


def test_backoff_geometric_schedule():
    table = BackoffTable(base_delay=3)
    delays = [backoff_gate(table, 0x10, False) for _ in range(3)]
    assert delays == [3, 6, 12]
    assert sum(delays) == cumulative_delay(3, 3)
    assert table.failures(0x10) == 3
    assert table.sealed and not table.halted


def test_backoff_success_no_delay_and_no_reset():
    table = BackoffTable()
    backoff_gate(table, 1, False)
    assert backoff_gate(table, 1, True) == 0
    assert table.failures(1) == 1
    assert backoff_gate(table, 1, False) == 2


def test_backoff_per_context_schedule():
    table = BackoffTable()
    for _ in range(5):
        backoff_gate(table, 1, False)
    assert backoff_gate(table, 2, False) == 1


def test_sealed_table_rejects_writes():
    table = BackoffTable()
    with pytest.raises(SealedTableError):
        table.increment(1)
    with table.update_window():
        assert table.halted and not table.sealed
        table.increment(1)
    assert table.sealed


def test_twenty_failure_cumulative_delay():
    table = BackoffTable(base_delay=1)
    total = sum(backoff_gate(table, 9, False) for _ in range(20))
    assert total == 2**20 - 1


def test_expected_attempts_closed_form():
    # brute force over 2^b codes without replacement: mean of uniform{1..2^b}
    for b in (1, 4, 8, 15):
        n = 2**b
        assert expected_bruteforce_attempts(b) == sum(range(1, n + 1)) / n
    assert expected_bruteforce_attempts(15) == 16384.5
