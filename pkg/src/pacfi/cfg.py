"""Per-function control-flow graphs with loop detection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from pacfi.asm import FunctionListing, InstrClass, Kind, Label, classify

ENDS_BLOCK = frozenset({Kind.DIRECT_BRANCH, Kind.COND_BRANCH, Kind.INDIRECT_BRANCH, Kind.RETURN})
DEFAULT_CHAIN_BUDGET = 256


@dataclass(frozen=True)
class BasicBlock:
    id: int
    first: int
    last: int
    successors: tuple[int, ...] = ()
    predecessors: tuple[int, ...] = ()
    terminator: Kind = Kind.OTHER
    external: tuple[str, ...] = ()
    unresolved: bool = False

    def indices(self) -> range:
        return range(self.first, self.last + 1)

    def __len__(self) -> int:
        return self.last - self.first + 1


@dataclass(frozen=True)
class Cfg:
    function: FunctionListing
    blocks: tuple[BasicBlock, ...]
    classes: tuple[InstrClass, ...]
    entry: int = 0
    loop_headers: frozenset[int] = frozenset()
    back_edges: tuple[tuple[int, int], ...] = ()
    _block_of: tuple[int, ...] = field(default=(), repr=False, compare=False)

    @property
    def name(self) -> str:
        return self.function.name

    def block_of(self, index: int) -> BasicBlock:
        return self.blocks[self._block_of[index]]

    def instr(self, index: int):
        return self.function.instructions[index]

    def cls(self, index: int) -> InstrClass:
        return self.classes[index]

    def target_block(self, index: int) -> int | None:
        """Block id a direct/conditional branch at ``index`` jumps to, if internal."""
        label = self.classes[index].branch_label
        if label is None:
            return None
        return _internal_index(self.function, label, self._block_of)

    def edges(self) -> list[tuple[int, int]]:
        return [(b.id, s) for b in self.blocks for s in b.successors]


def _internal_index(fn: FunctionListing, label: Label, block_of) -> int | None:
    addr = fn.resolve(label)
    if addr is None:
        return None
    idx = fn.index_of(addr)
    if idx is None:
        return None
    return block_of[idx] if block_of else idx


def build_cfg(fn: FunctionListing, classes=None) -> Cfg:
    classes = tuple(classes) if classes is not None else tuple(classify(i) for i in fn.instructions)
    n = len(fn.instructions)
    leaders = {0}
    for i, c in enumerate(classes):
        if c.kind in (Kind.DIRECT_BRANCH, Kind.COND_BRANCH) and c.branch_label is not None:
            t = _internal_index(fn, c.branch_label, None)
            if t is not None:
                leaders.add(t)
        if c.kind in ENDS_BLOCK and i + 1 < n:
            leaders.add(i + 1)
    starts = sorted(leaders)
    spans = [(s, (starts[k + 1] - 1) if k + 1 < len(starts) else n - 1) for k, s in enumerate(starts)]
    block_of = [0] * n
    for bid, (s, e) in enumerate(spans):
        for i in range(s, e + 1):
            block_of[i] = bid

    succs: list[list[int]] = [[] for _ in spans]
    external: list[list[str]] = [[] for _ in spans]
    unresolved = [False] * len(spans)
    for bid, (s, e) in enumerate(spans):
        c = classes[e]
        out: list[int] = []
        if c.kind in (Kind.DIRECT_BRANCH, Kind.COND_BRANCH):
            t = _internal_index(fn, c.branch_label, block_of) if c.branch_label else None
            if t is not None:
                out.append(t)
            else:
                external[bid].append(c.branch_label.text() if c.branch_label else "?")
        if c.kind is Kind.INDIRECT_BRANCH:
            unresolved[bid] = True
        falls = c.kind not in (Kind.DIRECT_BRANCH, Kind.INDIRECT_BRANCH, Kind.RETURN)
        if falls and e + 1 < n:
            out.append(bid + 1)
        succs[bid] = list(dict.fromkeys(out))

    preds: list[list[int]] = [[] for _ in spans]
    for bid, out in enumerate(succs):
        for t in out:
            preds[t].append(bid)

    back_edges = _find_back_edges(succs)
    blocks = tuple(
        BasicBlock(bid, s, e, tuple(succs[bid]), tuple(sorted(set(preds[bid]))), classes[e].kind,
                   tuple(external[bid]), unresolved[bid])
        for bid, (s, e) in enumerate(spans)
    )
    return Cfg(fn, blocks, classes, 0, frozenset(t for _, t in back_edges), tuple(back_edges), tuple(block_of))


def _find_back_edges(succs: list[list[int]]) -> list[tuple[int, int]]:
    """Edges into a block still on the DFS stack (entry first, then any unvisited)."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = [WHITE] * len(succs)
    back: list[tuple[int, int]] = []
    for root in range(len(succs)):
        if color[root] != WHITE:
            continue
        color[root] = GREY
        stack = [(root, iter(succs[root]))]
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = BLACK
                stack.pop()
            elif color[nxt] == GREY:
                back.append((node, nxt))
            elif color[nxt] == WHITE:
                color[nxt] = GREY
                stack.append((nxt, iter(succs[nxt])))
    return sorted(back)


def find_paths_backward(cfg: Cfg, start: int, budget: int = DEFAULT_CHAIN_BUDGET,
                        max_chains: int | None = None) -> Iterator[list[int]]:
    """Yield predecessor chains ending at the entry, at a block without preds,
    or where every predecessor is already on the chain.

    A chain lists blocks walked backward from ``start`` (exclusive) and never
    revisits a block, so a loop around ``start`` is traversed at most once and
    enumeration terminates. Chains are cut at ``budget`` blocks.
    """
    emitted = 0
    stack: list[tuple[int, list[int]]] = [(start, [])]
    while stack:
        node, chain = stack.pop()
        preds = cfg.blocks[node].predecessors
        if node == cfg.entry or not preds or len(chain) >= budget:
            yield chain
            emitted += 1
            if max_chains is not None and emitted >= max_chains:
                return
            if len(chain) >= budget:
                continue
        seen = set(chain)
        fresh = [p for p in preds if p not in seen]
        if not fresh and node != cfg.entry and preds:
            # every predecessor is already on the chain: cut the cycle here
            yield chain
            emitted += 1
            if max_chains is not None and emitted >= max_chains:
                return
        for p in reversed(fresh):
            stack.append((p, chain + [p]))


def dump_edges(cfg: Cfg) -> str:
    """One edge per line: ``function src dst kind``."""
    back = set(cfg.back_edges)
    lines = []
    for b in cfg.blocks:
        for s in b.successors:
            if (b.id, s) in back:
                kind = "back"
            elif s == b.id + 1 and b.terminator not in (Kind.DIRECT_BRANCH, Kind.COND_BRANCH):
                kind = "fallthrough"
            else:
                kind = "branch"
            lines.append(f"{cfg.name} B{b.id} B{s} {kind}")
        for ext in b.external:
            lines.append(f"{cfg.name} B{b.id} {ext.replace(' ', '')} external")
        if b.unresolved:
            lines.append(f"{cfg.name} B{b.id} ? unresolved")
    return "\n".join(lines) + ("\n" if lines else "")
