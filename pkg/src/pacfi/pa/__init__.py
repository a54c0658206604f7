"""Pointer-authentication semantics and the kernel signing schemes."""

from pacfi.pa.backoff import (
    BackoffTable,
    SealedTableError,
    backoff_gate,
    cumulative_delay,
    expected_bruteforce_attempts,
)
from pacfi.pa.model import (
    DEFAULT_LAYOUT,
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
    pac_generic,
    pac_sign,
    xpac_strip,
)
from pacfi.pa.schemes import (
    ContextScheme,
    KeySplit,
    PreemptionContext,
    auth_return,
    chain_sign_context,
    return_context,
    sign_context,
    sign_return,
    stable_hash64,
    verify_context,
)

__all__ = [
    "AuthFault", "BackoffTable", "BranchOutcome", "ContextScheme", "DEFAULT_LAYOUT",
    "KeyRole", "KeySplit", "NonCanonicalPointer", "PaKey", "PointerLayout",
    "PreemptionContext", "Provenance", "SealedTableError", "SignedPointer",
    "auth_return", "backoff_gate", "branch_to", "chain_sign_context", "compute_pac",
    "cumulative_delay", "expected_bruteforce_attempts", "invert_key", "pac_auth",
    "pac_generic", "pac_sign", "return_context", "sign_context", "sign_return",
    "stable_hash64", "verify_context", "xpac_strip",
]
