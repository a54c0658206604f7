"""Intraprocedural inclusion-based points-to analysis over the IR."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from pacfi.analyzer.ir import Function

HEAP_ALLOCATORS = frozenset({
    "kmalloc", "kzalloc", "kcalloc", "kmalloc_array", "kvmalloc", "vmalloc", "vzalloc",
    "kmem_cache_alloc", "kmem_cache_zalloc", "devm_kzalloc", "alloc_pages",
})


@dataclass(frozen=True, order=True)
class Const:
    symbol: str

    def __str__(self):
        return f"Const({self.symbol})"


@dataclass(frozen=True, order=True)
class StackAddr:
    frame: str

    def __str__(self):
        return f"StackAddr({self.frame})"


@dataclass(frozen=True, order=True)
class HeapAddr:
    site: str

    def __str__(self):
        return f"HeapAddr({self.site})"


@dataclass(frozen=True, order=True)
class Param:
    fn: str
    index: int

    def __str__(self):
        return f"Param({self.fn},{self.index})"


@dataclass(frozen=True, order=True)
class FieldValue:
    """The value currently held in another record's field."""

    record: str
    field: str

    def __str__(self):
        return f"Field({self.record}.{self.field})"


@dataclass(frozen=True, order=True)
class _Unknown:
    def __str__(self):
        return "Unknown"


Unknown = _Unknown()
AbstractValue = Const | StackAddr | HeapAddr | Param | FieldValue | _Unknown
PointsToSet = frozenset


def _seed(fn: Function, allocators) -> tuple[dict[str, set], list[tuple[str, str]]]:
    base: dict[str, set] = {}
    edges: list[tuple[str, str]] = []  # (src, dst): pts(src) ⊆ pts(dst)
    for i, p in enumerate(fn.params):
        base.setdefault(p.name, set()).add(Param(fn.name, i))
    for ins in fn.body:
        site = f"{fn.name}:{ins.line}"
        if ins.op == "store-local":
            edges.append((ins.args[1], ins.args[0]))
            base.setdefault(ins.args[0], set())
            continue
        dst = ins.dst
        if dst is None:
            continue
        slot = base.setdefault(dst, set())
        if ins.op == "const-addr":
            slot.add(Const(ins.args[0]))
        elif ins.op == "stack-alloc":
            slot.add(StackAddr(site))
        elif ins.op == "heap-alloc":
            slot.add(HeapAddr(site) if ins.args[0] in allocators else Unknown)
        elif ins.op in ("copy", "cast"):
            edges.append((ins.args[0], dst))
        elif ins.op == "load":
            rec, _, fld = ins.args[0].partition(".")
            slot.add(FieldValue(rec, fld))
        else:
            slot.add(Unknown)  # call results and anything else are not tracked
    return base, edges


@lru_cache(maxsize=4096)
def solve(fn: Function, allocators: frozenset = HEAP_ALLOCATORS) -> dict[str, frozenset]:
    """Points-to sets for every name in ``fn``, as a fixpoint of the copy edges."""
    pts, edges = _seed(fn, allocators)
    for src, _ in edges:
        if src not in pts:
            pts[src] = {Unknown}  # read of a name nothing defines
    changed = True
    while changed:
        changed = False
        for src, dst in edges:
            before = len(pts[dst])
            pts[dst] |= pts[src]
            changed |= len(pts[dst]) != before
    return {k: frozenset(v) for k, v in pts.items()}


def andersen_points_to(fn: Function, value: str, allocators: frozenset = HEAP_ALLOCATORS) -> frozenset:
    """Points-to set of ``value`` in ``fn``; undefined names give {Unknown}."""
    got = solve(fn, allocators).get(value)
    return got if got else frozenset({Unknown})


def _passes(v) -> bool:
    return isinstance(v, (Const, StackAddr, HeapAddr))


def check_pts(pts) -> bool:
    """True iff every member is a constant, a stack address or a fresh heap object."""
    return bool(pts) and all(_passes(v) for v in pts)


def format_pts(pts) -> str:
    return "{" + ", ".join(sorted(str(v) for v in pts)) + "}"


def expand_points_to(program, fn: Function, value: str, depth_cap: int | None = 5,
                     allocators: frozenset = HEAP_ALLOCATORS) -> frozenset:
    """Union of ``value``'s points-to sets with parameters replaced at every call site.

    Parameters still unresolved after ``depth_cap`` caller hops stay in the set.
    """
    out = set()
    frontier = [(fn, andersen_points_to(fn, value, allocators))]
    seen = set()
    depth = 0
    while frontier:
        nxt = []
        for f, pts in frontier:
            params = [v for v in pts if isinstance(v, Param)]
            out |= {v for v in pts if not isinstance(v, Param)}
            if not params:
                continue
            if depth_cap is not None and depth >= depth_cap:
                out |= set(params)
                continue
            callers = list(program.call_sites(f.name))
            if not callers:
                out |= set(params)
            for caller, call in callers:
                for p in params:
                    key = (caller.name, call.line, p)
                    if key not in seen:
                        seen.add(key)
                        nxt.append((caller, andersen_points_to(caller, call.call_args[p.index], allocators)))
        frontier = nxt
        depth += 1
    return frozenset(out)
