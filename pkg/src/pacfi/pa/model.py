"""Bit-level model of ARMv8.3 pointer authentication.

A pointer is a 64-bit value whose low ``va_bits`` carry the address and whose
upper bits are either the sign extension (raw pointer) or, at the PAC
positions, an authentication code. Bit 55 is never used for the PAC; it keeps
selecting the upper or lower address range so that stripping can restore the
extension.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from functools import cached_property

from pacfi.pa.siphash import MASK64, prf64

MASK128 = (1 << 128) - 1
SELECTOR_BIT = 55
ERROR_SHIFT = 61


class PaError(Exception):
    """Base class for PA model errors."""


class NonCanonicalPointer(PaError, ValueError):
    """Raised when signing a pointer that is not a raw canonical address."""


class AuthFault(PaError):
    """Authentication failure trapped at ``aut`` time (FPAC behaviour)."""


class KeyRole(enum.Enum):
    APIA = "APIA"
    APIB = "APIB"
    APDA = "APDA"
    APDB = "APDB"
    APGA = "APGA"

    @property
    def family(self) -> str:
        return "B" if self in (KeyRole.APIB, KeyRole.APDB) else "A"

    @property
    def is_code(self) -> bool:
        return self in (KeyRole.APIA, KeyRole.APIB)


class PaKey:
    """A 128-bit PA key bound to one key register.

    The material is deliberately opaque: it is hidden from ``repr`` and the
    object refuses pickling and JSON encoding (see :mod:`pacfi.serialize`).
    """

    __slots__ = ("role", "_material")

    def __init__(self, role: KeyRole, material: int):
        if not 0 <= material <= MASK128:
            raise ValueError("key material must fit in 128 bits")
        object.__setattr__(self, "role", role)
        object.__setattr__(self, "_material", material)

    def __setattr__(self, name, value):
        raise AttributeError("PaKey is immutable")

    @classmethod
    def from_seed(cls, seed: int, role: KeyRole = KeyRole.APIB) -> "PaKey":
        rng = random.Random(f"pacfi-key:{seed}:{role.value}")
        return cls(role, rng.getrandbits(128))

    def __repr__(self) -> str:
        return f"PaKey(role={self.role.value}, material=<redacted>)"

    def __eq__(self, other) -> bool:
        if not isinstance(other, PaKey):
            return NotImplemented
        return self.role is other.role and self._material == other._material

    def __hash__(self) -> int:
        return hash((self.role, self._material))

    def __reduce_ex__(self, protocol):
        raise TypeError("PA key material must never be serialised")

    def __getstate__(self):
        raise TypeError("PA key material must never be serialised")


@dataclass(frozen=True)
class PointerLayout:
    va_bits: int = 48
    pac_bits: int = 15
    enhanced_pac2: bool = False
    fpac: bool = False

    def __post_init__(self):
        if not 32 <= self.va_bits <= SELECTOR_BIT:
            raise ValueError(f"va_bits must be in [32, {SELECTOR_BIT}]")
        if self.pac_bits < 1 or self.pac_bits > len(self._free_positions()):
            raise ValueError(
                f"pac_bits={self.pac_bits} does not fit above va_bits={self.va_bits}")
        if self.va_bits + self.pac_bits > 63:
            raise ValueError("va_bits + pac_bits must not exceed 63")

    def _free_positions(self) -> tuple[int, ...]:
        return tuple(b for b in range(self.va_bits, 64) if b != SELECTOR_BIT)

    @cached_property
    def pac_positions(self) -> tuple[int, ...]:
        return self._free_positions()[: self.pac_bits]

    @cached_property
    def pac_mask(self) -> int:
        m = 0
        for b in self.pac_positions:
            m |= 1 << b
        return m

    @cached_property
    def ext_mask(self) -> int:
        return MASK64 ^ ((1 << self.va_bits) - 1)

    @property
    def error_mask(self) -> int:
        return 0b11 << ERROR_SHIFT

    def is_canonical(self, value: int) -> bool:
        ext = value & self.ext_mask
        if (value >> (self.va_bits - 1)) & 1:
            return ext == self.ext_mask
        return ext == 0

    def canonicalize(self, value: int) -> int:
        """Restore the extension bits from the range selector (bit 55)."""
        low = value & ((1 << self.va_bits) - 1)
        if (value >> SELECTOR_BIT) & 1:
            return low | self.ext_mask
        return low

    def extract_pac(self, value: int) -> int:
        out = 0
        for i, b in enumerate(self.pac_positions):
            out |= ((value >> b) & 1) << i
        return out

    def deposit_pac(self, value: int, pac: int) -> int:
        value &= ~self.pac_mask & MASK64
        for i, b in enumerate(self.pac_positions):
            value |= ((pac >> i) & 1) << b
        return value


DEFAULT_LAYOUT = PointerLayout()


class Provenance(enum.Enum):
    RAW = "raw"
    SIGNED = "signed"
    ERROR = "error"


@dataclass(frozen=True)
class SignedPointer:
    value: int
    provenance: Provenance = Provenance.RAW
    role: KeyRole | None = None

    @classmethod
    def raw(cls, value: int) -> "SignedPointer":
        return cls(value & MASK64, Provenance.RAW)

    def __str__(self) -> str:
        tag = self.provenance.value
        if self.role is not None:
            tag += f"({self.role.value})"
        return f"{self.value:#018x}<{tag}>"


class BranchOutcome(enum.Enum):
    OK = "ok"
    FAULT = "fault"


def _value(p: int | SignedPointer) -> int:
    return p.value if isinstance(p, SignedPointer) else p & MASK64


def compute_pac(ptr: int, ctx: int, key: PaKey, layout: PointerLayout = DEFAULT_LAYOUT) -> int:
    """The truncated PRF output for a canonical pointer under (ctx, key)."""
    return prf64(key._material, ptr, ctx) & ((1 << layout.pac_bits) - 1)


def pac_generic(value: int, ctx: int, key: PaKey) -> int:
    """``pacga``-style MAC: the top 32 bits of the PRF, low half zero."""
    return (prf64(key._material, value & MASK64, ctx & MASK64) >> 32) << 32


def pac_sign(ptr: int | SignedPointer, ctx: int, key: PaKey,
             layout: PointerLayout = DEFAULT_LAYOUT) -> SignedPointer:
    if isinstance(ptr, SignedPointer) and ptr.provenance is not Provenance.RAW:
        raise NonCanonicalPointer(f"refusing to sign {ptr}: not a raw pointer")
    value = _value(ptr)
    if not layout.is_canonical(value):
        raise NonCanonicalPointer(f"{value:#018x} is not canonical for va_bits={layout.va_bits}")
    pac = compute_pac(value, ctx, key, layout)
    if layout.enhanced_pac2:
        field = layout.extract_pac(value) ^ pac
    else:
        field = pac
    return SignedPointer(layout.deposit_pac(value, field), Provenance.SIGNED, key.role)


def pac_auth(sp: int | SignedPointer, ctx: int, key: PaKey,
             layout: PointerLayout = DEFAULT_LAYOUT) -> SignedPointer:
    """Authenticate ``sp``; failure flips the error code instead of trapping.

    With ``layout.fpac`` the failure raises :class:`AuthFault` immediately.
    """
    value = _value(sp)
    restored = layout.canonicalize(value)
    expected = compute_pac(restored, ctx, key, layout)
    field = layout.extract_pac(value)
    if layout.enhanced_pac2:
        field ^= layout.extract_pac(restored)
    if field == expected:
        return SignedPointer(restored, Provenance.RAW)
    if layout.fpac:
        raise AuthFault(f"authentication of {value:#018x} failed")
    code = 0b10 if key.role.family == "B" else 0b01
    # codes 0b01/0b10 never equal an all-zero or all-one extension
    bad = (restored & ~layout.error_mask & MASK64) | (code << ERROR_SHIFT)
    return SignedPointer(bad, Provenance.ERROR, key.role)


def xpac_strip(sp: int | SignedPointer, layout: PointerLayout = DEFAULT_LAYOUT) -> SignedPointer:
    return SignedPointer(layout.canonicalize(_value(sp)), Provenance.RAW)


def branch_to(sp: int | SignedPointer, layout: PointerLayout = DEFAULT_LAYOUT) -> BranchOutcome:
    if isinstance(sp, SignedPointer) and sp.provenance is Provenance.ERROR:
        return BranchOutcome.FAULT
    return BranchOutcome.OK if layout.is_canonical(_value(sp)) else BranchOutcome.FAULT


def invert_key(key: PaKey) -> PaKey:
    return PaKey(key.role, ~key._material & MASK128)
