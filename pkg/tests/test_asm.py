import shutil
import struct
import subprocess

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pacfi.asm import (
    Imm,
    Kind,
    Label,
    ListingError,
    Mem,
    MnemonicTable,
    Reg,
    classify,
    default_table,
    format_listing,
    is_label_materialization,
    parse_listing,
    parse_snippet,
)

OBJDUMP = """
vmlinux:     file format elf64-littleaarch64


Disassembly of section .text:

ffff800010081000 <el1_irq>:
ffff800010081000:\td503233f \tpaciasp
ffff800010081004:\ta9bf7bfd \tstp\tx29, x30, [sp, #-16]!
ffff800010081008:\t910003fd \tmov\tx29, sp
ffff80001008100c:\t94000010 \tbl\tffff80001008104c <printk>
ffff800010081010:\ta8c17bfd \tldp\tx29, x30, [sp], #16
ffff800010081014:\td50323bf \tautiasp
ffff800010081018:\td65f03c0 \tret

ffff80001008101c <helper>:
ffff80001008101c:\t54000040 \tb.eq\tffff800010081024 <helper+0x8>  // b.none
ffff800010081020:\td503201f \tnop
ffff800010081024:\td65f03c0 \tret
"""


def kinds(fn):
    return [classify(i).kind for i in fn.instructions]


def test_load_then_indirect_call():
    fn = parse_snippet(["ldr x21, [sp, #200]", "blr x21"])
    assert kinds(fn) == [Kind.LOAD, Kind.INDIRECT_CALL]
    assert fn.instructions[0].operands == (Reg("x21"), Mem("sp", 200))


def test_empty_text():
    assert parse_listing("") == []
    assert parse_listing("// only a comment\n\n") == []


def test_addr_materialization_then_sign():
    fn = parse_snippet(["adrp x0, L", "add x0, x0, #8", "pacia x0, x1"])
    assert kinds(fn) == [Kind.ADDR_CALC, Kind.ARITH, Kind.PAC_SIGN]
    assert is_label_materialization(fn.instructions[0], fn.instructions[1])


def _assemble_and_disassemble(lines):
    """Assemble with clang and decode the bytes with capstone."""
    capstone = pytest.importorskip("capstone")
    if shutil.which("clang") is None:
        pytest.skip("clang not available")
    import tempfile
    from pathlib import Path
    with tempfile.TemporaryDirectory() as d:
        src, obj = Path(d, "t.s"), Path(d, "t.o")
        src.write_text("f:\n" + "\n".join(lines) + "\nL: ret\n")
        proc = subprocess.run(["clang", "--target=aarch64-linux-gnu", "-march=armv8.3-a", "-c", str(src), "-o", str(obj)],
                              capture_output=True)
        if proc.returncode != 0:
            pytest.skip("clang cannot target aarch64 here")
        data = obj.read_bytes()
    shoff, = struct.unpack_from("<Q", data, 0x28)
    shentsize, shnum, shstrndx = struct.unpack_from("<HHH", data, 0x3A)
    secs = [struct.unpack_from("<IIQQQQIIQQ", data, shoff + i * shentsize) for i in range(shnum)]
    names_off = secs[shstrndx][4]
    text = next(data[s[4]: s[4] + s[5]] for s in secs
                if data[names_off + s[0]: data.index(b"\0", names_off + s[0])] == b".text")
    md = capstone.Cs(capstone.CS_ARCH_ARM64, capstone.CS_MODE_ARM)
    return [f"{i.mnemonic} {i.op_str}".strip() for i in md.disasm(text, 0x1000)][: len(lines)]


REFERENCE_LINES = [
    "adrp x0, L", "add x0, x0, #8", "pacia x0, x1", "autib x2, x16", "paciasp", "autiasp",
    "xpaci x3", "ldr x21, [sp, #200]", "stp x2, x3, [x29, #-16]", "blr x21", "br x4",
    "bl L", "b L", "cbz x0, L", "mov x21, x20", "blraa x5, x6", "retab",
]


def test_classes_match_reference_disassembler():
    decoded = _assemble_and_disassemble(REFERENCE_LINES)
    ours = kinds(parse_snippet(REFERENCE_LINES))
    theirs = kinds(parse_snippet(decoded))
    assert theirs == ours


def test_classify_auth_with_context():
    c = classify(parse_snippet(["autib x2, x16"]).instructions[0])
    assert (c.kind, c.key, c.target, c.context) == (Kind.PAC_AUTH, "B", "x2", "x16")


def test_classify_register_move():
    c = classify(parse_snippet(["mov x21, x20"]).instructions[0])
    assert (c.kind, c.dests, c.srcs) == (Kind.ARITH, ("x21",), ("x20",))


def test_classify_pair_store():
    c = classify(parse_snippet(["stp x2, x3, [x29, #-16]"]).instructions[0])
    assert c.kind is Kind.STORE and set(c.srcs) == {"x2", "x3"} and c.mem_base == "x29"


def test_unknown_mnemonic_is_other():
    c = classify(parse_snippet(["frobnicate x1, x2"]).instructions[0])
    assert c.kind is Kind.OTHER and c.dests == ("x1",)


def test_combined_forms_have_auth_effect():
    fn = parse_snippet(["blraa x8, x9", "braaz x3", "retaa", "eret"])
    cs = [classify(i) for i in fn.instructions]
    assert cs[0].kind is Kind.INDIRECT_CALL and cs[0].auth_effect and cs[0].context == "x9"
    assert cs[1].kind is Kind.INDIRECT_BRANCH and cs[1].zero_context
    assert cs[2].kind is Kind.RETURN and cs[2].authenticates and cs[2].target == "x30"
    assert cs[3].target == "elr_el1" and not cs[3].authenticates


def test_register_aliases_normalize():
    fn = parse_snippet(["mov w0, w1", "mov x29, sp", "mov fp, lr", "mov x2, xzr"])
    assert fn.instructions[0].operands == (Reg("x0"), Reg("x1"))
    assert fn.instructions[2].operands == (Reg("x29"), Reg("x30"))
    c = classify(fn.instructions[3])
    assert c.srcs == () and c.constant_src


def test_every_pa_entry_populates_target_and_context():
    table = default_table()
    operand_text = {0: "", 1: " x1", 2: " x1, x2"}
    for name, entry in table._exact.items():
        if entry.kind not in (Kind.PAC_SIGN, Kind.PAC_AUTH, Kind.PAC_STRIP):
            continue
        nops = max([int(v[2:]) + 1 for k, v in entry.attrs if v.startswith("op")] or [0])
        c = classify(parse_snippet([name + operand_text[nops]]).instructions[0])
        assert c.target is not None, name
        if entry.kind is not Kind.PAC_STRIP:
            assert c.context is not None or c.zero_context, name


def test_table_is_extensible_without_code_change(tmp_path):
    path = tmp_path / "extra.tsv"
    path.write_text(default_table_text() + "\nfrobauth  PacAuth  key=A target=op0 context=op1\n")
    table = MnemonicTable.from_file(path)
    c = classify(parse_snippet(["frobauth x1, x2"]).instructions[0], table)
    assert (c.kind, c.target, c.context) == (Kind.PAC_AUTH, "x1", "x2")


def default_table_text():
    from importlib import resources
    return resources.files("pacfi").joinpath("data", "mnemonics.tsv").read_text()


def test_objdump_tolerance():
    fns = parse_listing(OBJDUMP)
    assert [f.name for f in fns] == ["el1_irq", "helper"]
    el1 = fns[0]
    assert el1.entry == 0xFFFF800010081000 and len(el1) == 7
    assert el1.instructions[3].operands == (Label("printk", 0xFFFF80001008104C),)
    assert el1.instructions[4].operands == (Reg("x29"), Reg("x30"), Mem("sp", 16, mode="post"))
    assert classify(fns[1].instructions[0]).branch_label.address == 0xFFFF800010081024


def test_canonical_round_trip_of_fixture_style_listing():
    fns = parse_listing(OBJDUMP)
    again = parse_listing(format_listing(fns))
    assert again == fns
    assert format_listing(again) == format_listing(fns)


def test_local_labels_resolve():
    fn = parse_snippet(["L:", "sub x0, x0, #1", "cbnz x0, L", "ret"])
    assert fn.labels == {"L": 0x1000}
    assert fn.resolve(classify(fn.instructions[1]).branch_label) == 0x1000


@pytest.mark.parametrize("text, lineno", [
    ("1000 f:\n  1000: ret\n  what is this\n", 3),
    ("  1000: ret\n", 1),
    ("1000 f:\n  1000: ret\n1004 f:\n  1004: ret\n", 3),
    ("1000 f:\n  1004: nop\n  1000: ret\n", 3),
    ("1000 f:\n  1000: ldr x0, [zz9]\n", 2),
])
def test_parse_errors_carry_line_numbers(text, lineno):
    with pytest.raises(ListingError) as exc:
        parse_listing(text)
    assert exc.value.lineno == lineno


def test_classify_is_deterministic_and_context_free():
    a = parse_snippet(["mov x1, x2", "autia x1, x3"])
    b = parse_snippet(["autia x1, x3"])
    assert classify(a.instructions[1]) == classify(b.instructions[0])
    assert classify(a.instructions[1]) == classify(a.instructions[1])


regs = st.sampled_from([f"x{i}" for i in range(31)] + ["sp", "xzr"] + [f"w{i}" for i in range(0, 31, 7)])
gprs = st.sampled_from([f"x{i}" for i in range(31)])
imms = st.integers(-4096, 4096).map(lambda v: f"#{v}")
mems = st.one_of(
    gprs.map(lambda r: f"[{r}]"),
    st.tuples(st.sampled_from(["sp"] + [f"x{i}" for i in range(31)]), st.integers(-512, 512)).map(
        lambda t: f"[{t[0]}, #{t[1]}]"),
    st.tuples(gprs, st.integers(-256, 255)).map(lambda t: f"[{t[0]}, #{t[1]}]!"),
    st.tuples(gprs, st.integers(-256, 255)).map(lambda t: f"[{t[0]}], #{t[1]}"),
    st.tuples(gprs, gprs, st.sampled_from(["lsl #3", "sxtw #2", "uxtw"])).map(lambda t: f"[{t[0]}, {t[1]}, {t[2]}]"),
)
lines = st.one_of(
    st.tuples(st.sampled_from(["add", "sub", "eor", "orr"]), regs, regs, st.one_of(regs, imms)).map(
        lambda t: f"{t[0]} {t[1]}, {t[2]}, {t[3]}"),
    st.tuples(st.sampled_from(["ldr", "str", "ldur"]), gprs, mems).map(lambda t: f"{t[0]} {t[1]}, {t[2]}"),
    st.tuples(st.sampled_from(["ldp", "stp"]), gprs, gprs, mems).map(lambda t: f"{t[0]} {t[1]}, {t[2]}, {t[3]}"),
    st.tuples(st.sampled_from(["pacia", "autib", "pacda"]), gprs, regs).map(lambda t: f"{t[0]} {t[1]}, {t[2]}"),
    st.sampled_from(["paciasp", "autibsp", "ret", "eret", "nop", "xpaclri", "b.ne L", "cbz x3, L",
                     "bl 0xffff800010001000 <printk+0x10>", "adrp x0, :got:sym", "csel x0, x1, x2, eq",
                     "add x0, x0, :lo12:sym", "msr elr_el1, x21", "mrs x0, sctlr_el1"]),
    st.tuples(st.sampled_from(["blr", "br", "blraaz"]), gprs).map(lambda t: f"{t[0]} {t[1]}"),
)


@settings(max_examples=200, deadline=None)
@given(body=st.lists(lines, min_size=1, max_size=20))
def test_round_trip_property(body):
    fn = parse_snippet(["L:"] + body)
    text = format_listing([fn])
    again = parse_listing(text)
    assert again == [fn]
    assert format_listing(again) == text


def test_post_index_operand_prints_canonically():
    ins = parse_snippet(["ldp x29, x30, [sp], #16"]).instructions[0]
    assert ins.text() == "ldp x29, x30, [sp], #16"
    assert isinstance(ins.operands[2], Mem) and ins.operands[2].writeback


def test_immediate_forms():
    ins = parse_snippet(["sub sp, sp, #0x40"]).instructions[0]
    assert ins.operands[2] == Imm(64)
