"""Time-of-check/time-of-use attack on a single function listing.

A small interpreter runs the function instruction by instruction. After every
instruction, and while a called function has saved registers on the stack,
the attacker may overwrite any memory word holding a raw kernel text pointer
with the gadget address. The attack succeeds when an indirect branch reaches
the gadget, or when a correctly signed gadget pointer ends up in memory (the
signing-oracle variant).
"""

from __future__ import annotations

from pacfi.asm import Imm, Label, Mem, Reg, Reloc, parse_listing
from pacfi.pa.model import AuthFault, KeyRole, Provenance, pac_auth, pac_sign, xpac_strip
from pacfi.sim.replay import function_address
from pacfi.sim.scenario import GADGET, TEXT_BASE, Outcome, Scenario, Transcript

MASK64 = (1 << 64) - 1
STACK_TOP = 0xFFFF_8000_4010_0000
DATA = 0xFFFF_8000_5000_0000
TEXT_SPAN = 1 << 28


class SimError(RuntimeError):
    """The listing uses an instruction the interpreter does not model."""


class Branch(Exception):
    def __init__(self, target: int, ok: bool):
        super().__init__(f"{target:#x}")
        self.target = target
        self.ok = ok


def _is_text(v: int) -> bool:
    return TEXT_BASE <= v < TEXT_BASE + TEXT_SPAN


class Machine:
    def __init__(self, scn: Scenario):
        self.scn = scn
        self.layout = scn.defense.layout()
        self.keys = {"A": scn.key(KeyRole.APIA), "B": scn.key(KeyRole.APIB)}
        self.regs = {f"x{i}": 0 for i in range(31)}
        self.regs["sp"] = STACK_TOP
        self.regs["x29"] = STACK_TOP
        self.regs["x30"] = function_address("caller_return")
        self.mem: dict[int, int] = {}
        self.failed_auth: set[int] = set()
        self.legit = function_address("legit_handler")
        self.modifier = 0x5EED_0000 | (scn.seed & 0xFFFF)
        # object passed in x0: a signed handler at +8, its modifier at +16
        self.regs["x0"] = DATA
        self.mem[DATA + 8] = pac_sign(self.legit, self.modifier, self.keys["B"], self.layout).value
        self.mem[DATA + 16] = self.modifier
        self.regs["x1"] = DATA + 0x100  # destination slot for signed results
        self.regs["x19"] = DATA + 0x200
        self.regs["x20"] = self.modifier
        self.tr = Transcript()
        self.overwritten: set[int] = set()

    # ---- register and memory helpers ----
    def get(self, op) -> int:
        if isinstance(op, Reg):
            return 0 if op.name == "xzr" else self.regs.get(op.name, 0)
        if isinstance(op, Imm):
            return op.value & MASK64
        if isinstance(op, Label):
            return op.address if op.address is not None else function_address(op.name)
        if isinstance(op, Reloc):
            addr = function_address(op.symbol)
            return addr & 0xFFF if "lo12" in op.modifier else addr
        raise SimError(f"cannot read operand {op!r}")

    def set(self, name: str, value: int) -> None:
        if name != "xzr":
            self.regs[name] = value & MASK64

    def address(self, mem: Mem) -> tuple[int, int]:
        """(effective address, base after writeback)."""
        base = self.regs[mem.base]
        off = self.regs[mem.index] if mem.index else mem.offset
        if mem.mode == "post":
            return base, base + off
        addr = base + off
        return addr, addr if mem.mode == "pre" else base

    # ---- PA ----
    def sign(self, value: int, ctx: int, key: str) -> int:
        try:
            return pac_sign(value, ctx, self.keys[key], self.layout).value
        except ValueError:
            return value  # signing a non-canonical value leaves it unusable either way

    def auth(self, value: int, ctx: int, key: str) -> int:
        try:
            res = pac_auth(value, ctx, self.keys[key], self.layout)
        except AuthFault:
            raise Branch(value, False) from None
        if res.provenance is Provenance.ERROR:
            self.failed_auth.add(res.value)
        return res.value

    # ---- attacker ----
    def attacker_window(self, where: str) -> None:
        if not (self.scn.capabilities.preempt_at_will and self.scn.capabilities.write_all):
            return
        for addr in sorted(self.mem):
            v = self.mem[addr]
            if _is_text(v) and v != GADGET and addr not in self.overwritten:
                self.mem[addr] = GADGET
                self.overwritten.add(addr)
                self.tr.add("attacker", "overwrite", at=where, slot=f"{addr:#x}", old=f"{v:#x}",
                            new=f"{GADGET:#x}")

    def branch(self, target: int) -> None:
        ok = target not in self.failed_auth and self.layout.is_canonical(target)
        self.tr.add("kernel", "branch", target=f"{target:#x}", ok=ok)
        if target == GADGET or not ok:
            raise Branch(target, ok)

    def call(self, name: str) -> None:
        """A modeled callee: saves the configured registers, may be preempted, restores them."""
        spills = self.scn.callee_spills
        sp = self.regs["sp"]
        frame = sp - 16 * ((len(spills) + 1) // 2 + 1)
        for k, r in enumerate(spills):
            self.mem[frame + 8 * k] = self.regs[r]
            self.regs[r] = 0xDEAD_0000 + k  # the callee reuses the register
        self.tr.add("kernel", "call", callee=name, spilled=list(spills))
        self.attacker_window(f"in {name}")
        for k, r in enumerate(spills):
            self.regs[r] = self.mem[frame + 8 * k]

    # ---- execution ----
    def step(self, ins) -> bool:
        """Execute one instruction; False on return."""
        m, ops = ins.mnemonic, ins.operands
        r = lambda i: ops[i].name  # noqa: E731
        if m == "nop":
            pass
        elif m in ("paciasp", "pacibsp"):
            self.set("x30", self.sign(self.regs["x30"], self.regs["sp"], m[4].upper()))
        elif m in ("autiasp", "autibsp"):
            self.set("x30", self.auth(self.regs["x30"], self.regs["sp"], m[4].upper()))
        elif m in ("pacia", "pacib"):
            self.set(r(0), self.sign(self.regs[r(0)], self.get(ops[1]), m[-1].upper()))
        elif m in ("paciza", "pacizb"):
            self.set(r(0), self.sign(self.regs[r(0)], 0, m[-1].upper()))
        elif m in ("autia", "autib"):
            self.set(r(0), self.auth(self.regs[r(0)], self.get(ops[1]), m[-1].upper()))
        elif m in ("autiza", "autizb"):
            self.set(r(0), self.auth(self.regs[r(0)], 0, m[-1].upper()))
        elif m in ("xpaci", "xpaclri"):
            reg = "x30" if m == "xpaclri" else r(0)
            self.set(reg, xpac_strip(self.regs[reg], self.layout).value)
        elif m == "mov":
            self.set(r(0), self.get(ops[1]))
        elif m in ("add", "sub"):
            a, b = self.get(ops[1]), self.get(ops[2])
            self.set(r(0), a + b if m == "add" else a - b)
        elif m == "adrp":
            self.set(r(0), self.get(ops[1]) & ~0xFFF)
        elif m == "adr":
            self.set(r(0), self.get(ops[1]))
        elif m in ("ldr", "str", "ldp", "stp"):
            mem = next(op for op in ops if isinstance(op, Mem))
            addr, new_base = self.address(mem)
            regs = [op.name for op in ops if isinstance(op, Reg)]
            for k, name in enumerate(regs):
                if m.startswith("ld"):
                    self.set(name, self.mem.get(addr + 8 * k, 0))
                else:
                    self.mem[addr + 8 * k] = 0 if name == "xzr" else self.regs[name]
            if mem.writeback:
                self.set(mem.base, new_base)
        elif m == "bl":
            self.set("x30", ins.address + 4)
            self.call(ops[0].name or f"{ops[0].address:#x}")
        elif m in ("blr", "br"):
            self.branch(self.regs[r(0)])
            if m == "blr":
                self.set("x30", ins.address + 4)
                self.call(f"{self.regs[r(0)]:#x}")
        elif m in ("blraa", "blrab", "braa", "brab"):
            target = self.auth(self.regs[r(0)], self.get(ops[1]), m[-1].upper())
            self.branch(target)
            if m.startswith("blr"):
                self.set("x30", ins.address + 4)
                self.call(f"{target:#x}")
        elif m in ("ret", "retaa", "retab"):
            if m != "ret":
                self.set("x30", self.auth(self.regs["x30"], self.regs["sp"], m[-1].upper()))
            self.branch(self.regs["x30"])
            return False
        else:
            raise SimError(f"instruction not modeled: {ins.text()}")
        return True

    def run(self, fn, limit: int = 10_000):
        i = 0
        for _ in range(limit):
            if i >= len(fn.instructions):
                return None
            ins = fn.instructions[i]
            if not self.step(ins):
                return None
            self.attacker_window(f"{ins.address:#x}")
            i += 1
        return None

    def forged_signatures(self) -> list[int]:
        """Memory slots holding a correctly signed gadget pointer (under either key, either modifier)."""
        out = []
        for addr, v in sorted(self.mem.items()):
            if self.layout.is_canonical(v):
                continue
            for key in ("A", "B"):
                for ctx in (self.modifier, 0):
                    try:
                        res = pac_auth(v, ctx, self.keys[key], self.layout)
                    except AuthFault:
                        continue
                    if res.provenance is Provenance.RAW and res.value == GADGET:
                        out.append(addr)
        return out


def simulate_toctou(scn: Scenario) -> Outcome:
    if not scn.listing:
        raise ValueError("toctou needs a listing")
    fns = parse_listing(scn.listing)
    fn = next((f for f in fns if f.name == scn.function), None) if scn.function else fns[0]
    if fn is None:
        raise ValueError(f"function {scn.function!r} not in listing")
    mach = Machine(scn)
    hijacked = False
    fault = None
    try:
        mach.run(fn)
    except Branch as b:
        hijacked = b.ok and b.target == GADGET
        fault = None if b.ok else f"{b.target:#x}"
    forged = mach.forged_signatures()
    success = hijacked or bool(forged)
    details = {
        "function": fn.name,
        "hijacked_branch": hijacked,
        "forged_signatures": [f"{a:#x}" for a in forged],
        "overwrites": len(mach.overwritten),
        "fault": fault,
        "callee_spills": list(scn.callee_spills),
    }
    return Outcome("toctou", success, attempts=len(mach.overwritten), time=len(mach.tr.events),
                   transcript=mach.tr.freeze(), details=details)
