"""AArch64 listing ingestion: operands, instructions and classification."""

from pacfi.asm.classify import (
    BRANCH_KINDS,
    CALL_KINDS,
    PA_KINDS,
    InstrClass,
    Kind,
    MnemonicTable,
    classify,
    default_table,
    is_label_materialization,
)
from pacfi.asm.listing import (
    FunctionListing,
    Instruction,
    ListingError,
    format_listing,
    parse_instruction,
    parse_listing,
    parse_snippet,
)
from pacfi.asm.operands import Cond, Imm, Label, Mem, Raw, Reg, Reloc, Shift, normalize_reg

__all__ = [
    "BRANCH_KINDS", "CALL_KINDS", "PA_KINDS", "InstrClass", "Kind", "MnemonicTable", "classify",
    "default_table", "is_label_materialization", "FunctionListing", "Instruction", "ListingError",
    "format_listing", "parse_instruction", "parse_listing", "parse_snippet", "Cond", "Imm", "Label",
    "Mem", "Raw", "Reg", "Reloc", "Shift", "normalize_reg",
]
