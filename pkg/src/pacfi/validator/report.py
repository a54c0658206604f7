"""Aggregation, ordering and rendering of validator findings."""

from __future__ import annotations

import csv
import io
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from pacfi.cfg import DEFAULT_CHAIN_BUDGET, Cfg, build_cfg
from pacfi.validator.checks import (
    ALL_PRINCIPLES,
    Principle,
    Violation,
    check_addrcalc_call_pac,
    check_all_spills,
    check_indirect_branches,
    check_pc_writes,
    check_signing_sites,
)
from pacfi.validator.resolve import Certainty, Resolver


def merge_findings(findings) -> list[Violation]:
    """One finding per (function, address, principle); Definite beats Potential."""
    best: dict[tuple, Violation] = {}
    for v in findings:
        cur = best.get(v.key)
        if cur is None or (cur.certainty is Certainty.POTENTIAL and v.certainty is Certainty.DEFINITE):
            best[v.key] = v
    return [best[k] for k in sorted(best)]


def validate_function(cfg: Cfg, principles=ALL_PRINCIPLES, budget: int = DEFAULT_CHAIN_BUDGET) -> list[Violation]:
    resolver = Resolver(cfg, budget)
    found: list[Violation] = []
    if Principle.P1 in principles:
        found += check_indirect_branches(cfg, resolver)
    if Principle.P2 in principles:
        found += check_all_spills(cfg)
    if Principle.P3 in principles:
        # the special case goes first so its message wins the merge at equal certainty
        found += check_addrcalc_call_pac(cfg)
        found += check_signing_sites(cfg, resolver)
    if Principle.P4 in principles:
        found += check_pc_writes(cfg, resolver)
    return merge_findings(found)


class Collector:
    """Thread-safe sink; ordering is fixed at ``finish`` regardless of arrival order."""

    def __init__(self):
        self._lock = threading.Lock()
        self._items: list[Violation] = []
        self.functions = 0

    def add(self, findings) -> None:
        with self._lock:
            self._items.extend(findings)
            self.functions += 1

    def finish(self) -> "ViolationReport":
        return ViolationReport(tuple(merge_findings(self._items)), self.functions)


@dataclass(frozen=True)
class ViolationReport:
    findings: tuple[Violation, ...]
    functions: int = 0

    def by_principle(self) -> dict[str, list[Violation]]:
        out = {p.value: [] for p in Principle}
        for v in self.findings:
            out[v.principle.value].append(v)
        return out

    @property
    def has_definite(self) -> bool:
        return any(v.certainty is Certainty.DEFINITE for v in self.findings)

    def counts(self) -> dict[str, dict[str, int]]:
        out = {p.value: {"Definite": 0, "Potential": 0} for p in Principle}
        for v in self.findings:
            out[v.principle.value][v.certainty.value] += 1
        return out

    def to_payload(self) -> dict:
        return {
            "functions": self.functions,
            "counts": self.counts(),
            "findings": [v.to_record() for v in self.findings],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["principle", "certainty", "function", "address", "trace", "message"])
        for v in self.findings:
            w.writerow([v.principle.value, v.certainty.value, v.function, f"{v.address:#x}",
                        " ".join(f"{a:#x}" for a in v.trace), v.message])
        return buf.getvalue()

    def to_table(self) -> str:
        if not self.findings:
            return f"{self.functions} functions checked, no findings\n"
        rows = [("principle", "certainty", "function", "address", "message")]
        rows += [(f"{v.principle.value} {v.principle.title}", v.certainty.value, v.function, f"{v.address:#x}",
                  v.message) for v in self.findings]
        widths = [max(len(r[k]) for r in rows) for k in range(4)]
        lines = ["  ".join(r[k].ljust(widths[k]) for k in range(4)) + "  " + r[4] for r in rows]
        lines.insert(1, "-" * (sum(widths) + 8 + len(rows[0][4])))
        return "\n".join(lines) + f"\n{len(self.findings)} findings in {self.functions} functions\n"


def validate_image(functions, principles=ALL_PRINCIPLES, jobs: int = 1,
                   budget: int = DEFAULT_CHAIN_BUDGET) -> ViolationReport:
    """Validate listings (or prebuilt CFGs), optionally on several threads."""
    cfgs = [f if isinstance(f, Cfg) else build_cfg(f) for f in functions]
    sink = Collector()
    if jobs <= 1:
        for cfg in cfgs:
            sink.add(validate_function(cfg, principles, budget))
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for fut in [pool.submit(validate_function, cfg, principles, budget) for cfg in cfgs]:
                sink.add(fut.result())
    return sink.finish()

