"""Static checks of PA invariants over classified listings."""

from pacfi.validator.checks import (
    ALL_PRINCIPLES,
    Principle,
    Violation,
    check_addrcalc_call_pac,
    check_all_spills,
    check_indirect_branches,
    check_no_spill,
    check_pc_writes,
    check_signing_sites,
)
from pacfi.validator.report import Collector, ViolationReport, merge_findings, validate_function, validate_image
from pacfi.validator.resolve import Certainty, Resolution, Resolver, SymbolicReg, Taint, validate_bb

__all__ = [
    "ALL_PRINCIPLES", "Principle", "Violation", "check_addrcalc_call_pac", "check_all_spills",
    "check_indirect_branches", "check_no_spill", "check_pc_writes", "check_signing_sites", "Collector",
    "ViolationReport", "merge_findings", "validate_function", "validate_image", "Certainty", "Resolution",
    "Resolver", "SymbolicReg", "Taint", "validate_bb",
]
