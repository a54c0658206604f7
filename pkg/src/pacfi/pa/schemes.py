"""Kernel-side signing schemes built on the PA primitives.

Covers preemption-context signing (independent, base-address chained and
key-chained with a timestamp), backward-edge return signing and the
kernel/user key split.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field, replace

from pacfi.pa.model import (
    DEFAULT_LAYOUT,
    BranchOutcome,
    KeyRole,
    PaKey,
    PointerLayout,
    SignedPointer,
    branch_to,
    invert_key,
    pac_auth,
    pac_generic,
    pac_sign,
)
from pacfi.pa.siphash import MASK64

NUM_GPRS = 31
FNAME_HASH_SHIFT = 48
FNAME_HASH_BITS = 16


def stable_hash64(text: str) -> int:
    """64-bit stable hash of a string (blake2b, little-endian)."""
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


class ContextScheme(enum.Enum):
    """How a preemption context is signed."""

    INDEPENDENT = "independent"   # each register signed alone, context = base address
    BASE_CHAIN = "base-chain"     # chained, seeded with the base address only
    TIMEBIND = "timebind"         # chained, seeded with pac(base address, timestamp)


@dataclass(frozen=True)
class PreemptionContext:
    regs: tuple[int, ...]
    elr: int
    spsr: int
    base_addr: int
    pac: int = 0
    time_pac: int = 0
    reg_pacs: tuple[int, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if len(self.regs) != NUM_GPRS:
            raise ValueError(f"expected {NUM_GPRS} general-purpose registers, got {len(self.regs)}")

    @classmethod
    def from_values(cls, base_addr: int, regs=None, elr: int = 0, spsr: int = 0) -> "PreemptionContext":
        regs = tuple(regs) if regs is not None else (0,) * NUM_GPRS
        return cls(regs=regs, elr=elr, spsr=spsr, base_addr=base_addr)

    def chain_values(self) -> list[int]:
        """Values folded into the chain, innermost first: spsr, elr, x30 .. x0."""
        return [self.spsr, self.elr] + [self.regs[i] for i in range(NUM_GPRS - 1, -1, -1)]

    def with_reg(self, index: int, value: int) -> "PreemptionContext":
        regs = list(self.regs)
        regs[index] = value & MASK64
        return replace(self, regs=tuple(regs))


def chain_steps(pc: PreemptionContext, seed: int, key: PaKey) -> list[int]:
    """Every intermediate value of the chain; the last one is the final pac."""
    acc = seed
    out = []
    for v in pc.chain_values():
        acc = pac_generic(v, acc, key)
        out.append(acc)
    return out


def chain_sign_context(pc: PreemptionContext, timestamp: int, key: PaKey,
                       layout: PointerLayout = DEFAULT_LAYOUT) -> tuple[int, int]:
    """Return ``(pac, time_pac)`` for a preemption context.

    ``time_pac`` binds the base address to the timestamp; the chain then folds
    every saved register through the PRF with the previous result as context.
    """
    time_pac = pac_sign(pc.base_addr, timestamp, key, layout).value
    return chain_steps(pc, time_pac, key)[-1], time_pac


def sign_context(pc: PreemptionContext, key: PaKey, scheme: ContextScheme = ContextScheme.TIMEBIND,
                 timestamp: int = 0, layout: PointerLayout = DEFAULT_LAYOUT) -> PreemptionContext:
    if scheme is ContextScheme.TIMEBIND:
        pac, time_pac = chain_sign_context(pc, timestamp, key, layout)
        return replace(pc, pac=pac, time_pac=time_pac, reg_pacs=())
    if scheme is ContextScheme.BASE_CHAIN:
        return replace(pc, pac=chain_steps(pc, pc.base_addr, key)[-1], time_pac=0, reg_pacs=())
    pacs = tuple(pac_generic(v, pc.base_addr, key) for v in pc.chain_values())
    return replace(pc, pac=0, time_pac=0, reg_pacs=pacs)


def verify_context(pc: PreemptionContext, key: PaKey, scheme: ContextScheme = ContextScheme.TIMEBIND,
                   timestamp: int = 0, layout: PointerLayout = DEFAULT_LAYOUT) -> bool:
    """Check a saved context against the trusted ``timestamp`` of its save.

    The timestamp comes from the kernel's own record of the save moment, not
    from the (attacker-writable) context itself.
    """
    if scheme is ContextScheme.TIMEBIND:
        pac, time_pac = chain_sign_context(pc, timestamp, key, layout)
        return pc.pac == pac and pc.time_pac == time_pac
    if scheme is ContextScheme.BASE_CHAIN:
        return pc.pac == chain_steps(pc, pc.base_addr, key)[-1]
    expected = [pac_generic(v, pc.base_addr, key) for v in pc.chain_values()]
    return list(pc.reg_pacs) == expected


def return_context(sp: int, fname_hash: int) -> int:
    """Backward-edge context: the function-name hash inserted above the stack pointer."""
    width_mask = (1 << FNAME_HASH_BITS) - 1
    low = sp & ((1 << FNAME_HASH_SHIFT) - 1)
    return low | ((fname_hash & width_mask) << FNAME_HASH_SHIFT)


def sign_return(ret_addr: int, sp: int, fname_hash: int, key: PaKey,
                layout: PointerLayout = DEFAULT_LAYOUT) -> SignedPointer:
    return pac_sign(ret_addr, return_context(sp, fname_hash), key, layout)


def auth_return(signed: SignedPointer | int, sp: int, fname_hash: int, key: PaKey,
                layout: PointerLayout = DEFAULT_LAYOUT) -> SignedPointer:
    return pac_auth(signed, return_context(sp, fname_hash), key, layout)


class KeySplit:
    """Kernel and user views of one key register.

    The kernel signs with the original material; while user code runs the
    register holds the bitwise inverse, so user-signed pointers never verify
    as kernel pointers and the original key is never written to memory.
    """

    def __init__(self, kernel_key: PaKey):
        self._kernel = kernel_key
        self._user = invert_key(kernel_key)
        self.in_kernel = True

    @property
    def role(self) -> KeyRole:
        return self._kernel.role

    def switch_to_user(self) -> None:
        self.in_kernel = False

    def switch_to_kernel(self) -> None:
        self.in_kernel = True

    @property
    def active(self) -> PaKey:
        return self._kernel if self.in_kernel else self._user

    def sign(self, ptr: int, ctx: int, layout: PointerLayout = DEFAULT_LAYOUT) -> SignedPointer:
        return pac_sign(ptr, ctx, self.active, layout)

    def auth(self, sp: SignedPointer | int, ctx: int, layout: PointerLayout = DEFAULT_LAYOUT) -> SignedPointer:
        return pac_auth(sp, ctx, self.active, layout)

    def kernel_accepts(self, sp: SignedPointer | int, ctx: int,
                       layout: PointerLayout = DEFAULT_LAYOUT) -> bool:
        return branch_to(pac_auth(sp, ctx, self._kernel, layout), layout) is BranchOutcome.OK
