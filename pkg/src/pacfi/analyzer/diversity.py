"""Diversity score of a record field and retbind candidate discovery.

The score counts how many distinct store sites give a field a value that is
unique per object: a constant, a stack address of the current frame or a fresh
heap allocation. Values that flow in through parameters are followed to call
sites for a bounded number of rounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from pacfi.analyzer.ir import IrProgram
from pacfi.analyzer.pointsto import (
    FieldValue,
    HEAP_ALLOCATORS,
    Param,
    _passes,
    andersen_points_to,
    format_pts,
)

DEFAULT_DEPTH_CAP = 5


@dataclass(frozen=True)
class SiteHit:
    function: str
    line: int
    pts: str
    score: int
    via: str = "local"  # local | caller | field:<record.field>

    def to_record(self) -> dict:
        return {"function": self.function, "line": self.line, "pts": self.pts,
                "score": self.score, "via": self.via}


@dataclass(frozen=True)
class Unresolved:
    function: str
    line: int
    pts: str
    reason: str

    def to_record(self) -> dict:
        return {"function": self.function, "line": self.line, "pts": self.pts, "reason": self.reason}


@dataclass(frozen=True)
class DiversityReport:
    record: str
    field: str
    ds: int
    contributing: tuple[SiteHit, ...] = ()
    unresolved: tuple[Unresolved, ...] = ()
    diagnostics: tuple[str, ...] = ()
    depth_cap: int | None = DEFAULT_DEPTH_CAP

    def to_record(self) -> dict:
        return {
            "record": self.record, "field": self.field, "ds": self.ds,
            "depth_cap": self.depth_cap,
            "contributing": [h.to_record() for h in self.contributing],
            "unresolved": [u.to_record() for u in self.unresolved],
            "diagnostics": list(self.diagnostics),
        }


@dataclass
class _Run:
    program: IrProgram
    depth_cap: int | None
    allocators: frozenset
    cache: dict = field(default_factory=dict)
    visiting: set = field(default_factory=set)
    diagnostics: list = field(default_factory=list)


def _split(pts):
    params = {v for v in pts if isinstance(v, Param)}
    deps = {v for v in pts if isinstance(v, FieldValue)}
    rest = set(pts) - params - deps
    return params, deps, rest


def _score_of(run: _Run, pts, fn_name: str, line: int, via: str, hits: list, unresolved: list) -> bool:
    """Score a parameter-free set; False if some member fails the check."""
    _, deps, rest = _split(pts)
    if not all(_passes(v) for v in rest):
        unresolved.append(Unresolved(fn_name, line, format_pts(pts), "unresolvable value"))
        return False
    score = 1 if rest else 0
    dep_names = []
    for d in sorted(deps):
        score += _field_score(run, d.record, d.field)
        dep_names.append(f"{d.record}.{d.field}")
    if score:
        hits.append(SiteHit(fn_name, line, format_pts(pts), score,
                            via if not dep_names else "field:" + ",".join(dep_names)))
    return True


def _field_score(run: _Run, record: str, fld: str) -> int:
    key = (record, fld)
    if key in run.cache:
        return run.cache[key].ds
    if key in run.visiting:
        run.diagnostics.append(f"{record}.{fld}: mutually dependent records, cycle contributes 0")
        return 0
    run.visiting.add(key)
    try:
        report = _estimate(run, record, fld)
    finally:
        run.visiting.discard(key)
    run.cache[key] = report
    return report.ds


def _estimate(run: _Run, record: str, fld: str) -> DiversityReport:
    program = run.program
    hits: list[SiteHit] = []
    unresolved: list[Unresolved] = []
    diag_start = len(run.diagnostics)

    # phase 1: (function, points-to set) of every store to record.field
    first_wk: dict = {}
    for fn, ins in program.stores_to(record, fld):
        pts = andersen_points_to(fn, ins.args[1], run.allocators)
        first_wk.setdefault((fn.name, pts), ins.line)

    # phase 2: local resolution
    wk: dict = {}
    for (fn_name, pts), line in first_wk.items():
        if any(isinstance(v, Param) for v in pts):
            wk[(fn_name, pts)] = line
        else:
            _score_of(run, pts, fn_name, line, "local", hits, unresolved)

    # phase 3: expand parameter flows at call sites, one caller hop per round
    cap = run.depth_cap
    if cap is None:
        # a parameter flow longer than the number of call sites must repeat one
        cap = sum(1 for fn in program.functions for ins in fn.body if ins.op == "call") + 1
    depth = 0
    while wk and depth < cap:
        upd: dict = {}
        for (fn_name, pts), line in wk.items():
            params, _, rest = _split(pts)
            if not all(_passes(v) for v in rest):
                unresolved.append(Unresolved(fn_name, line, format_pts(pts), "unresolvable value"))
                continue
            callers = list(program.call_sites(fn_name))
            if not callers:
                unresolved.append(Unresolved(fn_name, line, format_pts(pts), f"{fn_name} has no callers"))
                continue
            kept = frozenset(pts) - params
            for caller, call in callers:
                arg_pts = set(kept)
                for p in sorted(params):
                    arg_pts |= andersen_points_to(caller, call.call_args[p.index], run.allocators)
                arg_pts = frozenset(arg_pts)
                if any(isinstance(v, Param) for v in arg_pts):
                    upd.setdefault((caller.name, arg_pts), call.line)
                else:
                    _score_of(run, arg_pts, caller.name, call.line, "caller", hits, unresolved)
        wk = upd
        depth += 1
    for (fn_name, pts), line in wk.items():
        unresolved.append(Unresolved(fn_name, line, format_pts(pts), "depth cap reached"))

    return DiversityReport(record, fld, sum(h.score for h in hits), tuple(hits), tuple(unresolved),
                           tuple(run.diagnostics[diag_start:]), run.depth_cap)


def estimate_diversity_score(program: IrProgram, record: str, field_name: str,
                             depth_cap: int | None = DEFAULT_DEPTH_CAP,
                             allocators: frozenset = HEAP_ALLOCATORS) -> DiversityReport:
    """Diversity score of ``record.field_name``; ``depth_cap=None`` removes the round limit."""
    if program.field_decl(f"{record}.{field_name}") is None:
        raise KeyError(f"{record}.{field_name} is not a declared field")
    run = _Run(program, depth_cap, allocators)
    run.visiting.add((record, field_name))
    return _estimate(run, record, field_name)


def record_scores(program: IrProgram, record: str, depth_cap: int | None = DEFAULT_DEPTH_CAP):
    """Reports for every field of ``record``, best (highest ds, then declaration order) first."""
    rec = program.record(record)
    if rec is None:
        raise KeyError(f"unknown record {record!r}")
    reports = [estimate_diversity_score(program, record, f.name, depth_cap) for f in rec.fields]
    order = {f.name: i for i, f in enumerate(rec.fields)}
    return sorted(reports, key=lambda r: (-r.ds, order[r.field]))


def find_retbind_candidates(program: IrProgram) -> list[tuple[str, int]]:
    """Functions that invoke a code-pointer parameter in place, with their static call-site counts."""
    out = []
    for fn, params in sorted(retbind_params(program).items()):
        out.append((fn, sum(1 for _ in program.call_sites(fn))))
    return out


def retbind_params(program: IrProgram) -> dict[str, tuple[str, ...]]:
    """Map function -> names of the code-pointer parameters it invokes."""
    out = {}
    for fn in program.functions:
        invoked = []
        for k, p in enumerate(fn.params):
            if not p.is_fptr:
                continue
            mark = Param(fn.name, k)
            if any(ins.indirect and mark in andersen_points_to(fn, ins.target[1:]) for ins in fn.body):
                invoked.append(p.name)
        if invoked:
            out[fn.name] = tuple(invoked)
    return out
