"""Signing contexts, allowed-target counts and precision histograms.

A corpus is a list of GEN sites (where a code pointer is signed) and USE sites
(where it is authenticated before an indirect call). Each site carries the
components a context can be built from; the refinement level decides which of
them go into the context id. Because a finer level only adds components, every
level partitions the sites more finely than the one before it.
"""

from __future__ import annotations

import enum
import random
from collections import Counter
from dataclasses import dataclass, field

from pacfi.analyzer.annotations import ObjBind, RetBind
from pacfi.analyzer.ir import IrProgram
from pacfi.analyzer.pointsto import Const, FieldValue, Param, andersen_points_to, expand_points_to
from pacfi.pa.schemes import stable_hash64


class Level(enum.Enum):
    ZERO = "zero"
    TYPESIG = "typesig"
    OBJTYPE = "objtype"
    OBJBIND = "objbind"
    RETBIND = "retbind"

    @property
    def rank(self) -> int:
        return list(Level).index(self)


@dataclass(frozen=True)
class Site:
    kind: str                 # "GEN" or "USE"
    name: str
    typesig: str
    owner: str | None = None  # record type holding the pointer
    bind: str | None = None   # object binding group
    ret: str | None = None    # calling context
    pointers: tuple[str, ...] = ()
    flow: str | None = None   # ties a USE to the GENs it legitimately consumes

    def __post_init__(self):
        if self.kind not in ("GEN", "USE"):
            raise ValueError(f"site kind must be GEN or USE, got {self.kind!r}")

    @property
    def weight(self) -> int:
        """Pointers signed at a GEN site (at least one)."""
        return max(1, len(self.pointers)) if self.kind == "GEN" else 0

    def to_record(self) -> dict:
        return {k: v for k, v in (
            ("kind", self.kind), ("name", self.name), ("typesig", self.typesig), ("owner", self.owner),
            ("bind", self.bind), ("ret", self.ret), ("pointers", list(self.pointers)), ("flow", self.flow),
        ) if v not in (None, [])}

    @classmethod
    def from_record(cls, rec: dict) -> "Site":
        return cls(rec["kind"], rec["name"], rec["typesig"], rec.get("owner"), rec.get("bind"),
                   rec.get("ret"), tuple(rec.get("pointers", ())), rec.get("flow"))


def _chain(acc: int, part: str) -> int:
    return stable_hash64(f"{acc:016x}|{part}")


def typesig_hash(typesig: str) -> int:
    """Stable 64-bit hash of a canonicalized type string (whitespace removed)."""
    return stable_hash64("".join(typesig.split()))


def context_value(site: Site, level: Level) -> int:
    if level is Level.ZERO:
        return 0
    acc = typesig_hash(site.typesig)
    if level.rank >= Level.OBJTYPE.rank and site.owner:
        acc = _chain(stable_hash64(site.owner), f"{acc:016x}")
    if level.rank >= Level.OBJBIND.rank and site.bind is not None:
        acc = _chain(acc, "bind:" + site.bind)
    if level.rank >= Level.RETBIND.rank and site.ret is not None:
        acc = _chain(acc, "ret:" + site.ret)
    return acc


def context_id(site: Site, level: Level) -> str:
    return f"{level.value}:{context_value(site, level):016x}"


@dataclass(frozen=True)
class ContextStats:
    gen: int = 0   # pointers signed under the context
    use: int = 0   # USE sites authenticating under it

    @property
    def allowed(self) -> int:
        return self.gen * self.use


@dataclass(frozen=True)
class ContextCorpus:
    sites: tuple[Site, ...]
    level: Level = Level.RETBIND
    _table: dict = field(default_factory=dict, repr=False, compare=False)

    def at(self, level: Level) -> "ContextCorpus":
        return ContextCorpus(self.sites, level)

    def context(self, site: Site) -> str:
        return context_id(site, self.level)

    @property
    def gen_sites(self) -> tuple[Site, ...]:
        return tuple(s for s in self.sites if s.kind == "GEN")

    @property
    def use_sites(self) -> tuple[Site, ...]:
        return tuple(s for s in self.sites if s.kind == "USE")

    def table(self) -> dict[str, ContextStats]:
        if not self._table:
            gen, use = Counter(), Counter()
            for s in self.sites:
                ctx = self.context(s)
                if s.kind == "GEN":
                    gen[ctx] += s.weight
                else:
                    use[ctx] += 1
            for ctx in sorted(set(gen) | set(use)):
                self._table[ctx] = ContextStats(gen[ctx], use[ctx])
        return dict(self._table)

    def to_payload(self) -> dict:
        return {"level": self.level.value, "sites": [s.to_record() for s in self.sites]}

    @classmethod
    def from_payload(cls, payload: dict) -> "ContextCorpus":
        return cls(tuple(Site.from_record(r) for r in payload["sites"]), Level(payload.get("level", "retbind")))


def allowed_targets(corpus: ContextCorpus) -> dict[str, int]:
    """count(ctx) = USE sites under ctx × pointers signed under ctx."""
    return {ctx: st.allowed for ctx, st in corpus.table().items()}


HISTOGRAM_BINS = ((0, 5, "<=5"), (6, 10, "6-10"), (11, 50, "11-50"), (51, 100, "51-100"), (101, None, ">100"))


def _view(values: list[int]) -> dict:
    n = len(values)
    hist = {}
    for lo, hi, label in HISTOGRAM_BINS:
        hist[label] = sum(1 for v in values if v >= lo and (hi is None or v <= hi))
    return {
        "sites": n,
        "le5_share": hist["<=5"] / n if n else 0.0,
        "gt100_share": hist[">100"] / n if n else 0.0,
        "max": max(values, default=0),
        "histogram": hist,
    }


def precision_report(corpus: ContextCorpus) -> dict:
    """Per-USE-site precision: allowed targets and how many calls share the context."""
    table = corpus.table()
    allowed, sharing = [], []
    for s in corpus.use_sites:
        st = table[corpus.context(s)]
        allowed.append(st.allowed)
        sharing.append(st.use)
    return {
        "level": corpus.level.value,
        "contexts": len(table),
        "allowed": _view(allowed),
        "diversity": _view(sharing),
    }


def format_precision(reports: list[dict]) -> str:
    lines = [f"{'level':<9} {'view':<10} {'sites':>6} {'<=5':>8} {'>100':>8} {'max':>7}"]
    for rep in reports:
        for view in ("allowed", "diversity"):
            v = rep[view]
            lines.append(f"{rep['level']:<9} {view:<10} {v['sites']:>6} {v['le5_share']:>7.1%} "
                         f"{v['gt100_share']:>7.1%} {v['max']:>7}")
    return "\n".join(lines) + "\n"


def random_corpus(seed: int, max_sites: int = 50) -> ContextCorpus:
    """A random corpus over a few shared types, owners and binding groups."""
    rng = random.Random(seed)
    n = rng.randint(1, max_sites)
    types = [f"void(*)(t{i})" for i in range(rng.randint(1, 4))]
    slots = [(f"rec{j}", rng.choice(types), rng.randint(1, 4)) for j in range(rng.randint(1, 6))]
    sites = []
    for k in range(n):
        owner, typesig, groups = rng.choice(slots)
        kind = rng.choice(("GEN", "USE"))
        owner = owner if rng.random() > 0.15 else None
        bind = f"o{rng.randrange(groups)}" if owner else None
        ptrs = tuple(f"fn{rng.randrange(30)}" for _ in range(rng.randint(1, 3))) if kind == "GEN" else ()
        sites.append(Site(kind, f"s{k}", typesig, owner, bind, None, ptrs, f"{owner}/{bind}"))
    return ContextCorpus(tuple(sites), Level.OBJBIND)


# ---- corpus extraction from the IR ----

def _const_pointers(pts) -> tuple[str, ...]:
    return tuple(sorted({v.symbol for v in pts if isinstance(v, Const)}))


def _type_of(decl) -> str:
    return decl.type or "fptr"


def build_corpus(program: IrProgram, annotations=(), level: Level = Level.RETBIND,
                 depth_cap: int | None = 5, groups: dict | None = None) -> ContextCorpus:
    """GEN/USE sites of ``program`` under the given annotations.

    GEN sites are stores into code-pointer fields and call sites passing a
    pointer to a function that invokes it in place. USE sites are indirect
    calls. An objbind on a record splits its sites round-robin into as many
    binding groups as the record's diversity score (``groups`` maps record to
    that number); a retbind gives each call site of the function its own
    calling context.
    """
    from pacfi.analyzer.diversity import estimate_diversity_score, retbind_params

    objbinds = {a.record: a for a in annotations if isinstance(a, ObjBind)}
    retbinds = {a.function: set(a.params) for a in annotations if isinstance(a, RetBind)}
    invoking = retbind_params(program)
    groups = dict(groups or {})
    for rec, a in objbinds.items():
        if rec not in groups:
            groups[rec] = estimate_diversity_score(program, rec, a.field, depth_cap).ds
        groups[rec] = max(1, groups[rec])

    def bound(record: str, fld: str) -> bool:
        a = objbinds.get(record)
        if a is None:
            return False
        return "*" in a.pointers or fld in a.pointers

    counters: Counter = Counter()

    def group(record: str, kind: str) -> str:
        k = counters[(record, kind)]
        counters[(record, kind)] += 1
        return f"g{k % groups[record]}"

    sites: list[Site] = []
    for fn in program.functions:
        for ins in fn.body:
            where = f"{fn.name}:{ins.line}"
            if ins.op == "store":
                decl = program.field_decl(ins.target)
                if not decl.is_fptr:
                    continue
                rec, _, fld = ins.target.partition(".")
                ptrs = _const_pointers(expand_points_to(program, fn, ins.args[1], depth_cap))
                if bound(rec, fld) and len(ptrs) > 1:
                    # each stored pointer lives in its own object: one signed instance per pointer
                    for ptr in ptrs:
                        sites.append(Site("GEN", f"{where}/{ptr}", _type_of(decl), rec, group(rec, "GEN"),
                                          None, (ptr,), f"{rec}.{fld}"))
                else:
                    bind = group(rec, "GEN") if bound(rec, fld) else None
                    sites.append(Site("GEN", where, _type_of(decl), rec, bind, None, ptrs, f"{rec}.{fld}"))
            elif ins.op == "call" and not ins.indirect and ins.target in invoking:
                callee = program.function(ins.target)
                for k, p in enumerate(callee.params):
                    if p.name not in invoking[callee.name]:
                        continue
                    pts = expand_points_to(program, fn, ins.call_args[k], depth_cap)
                    ret = where if p.name in retbinds.get(callee.name, ()) else None
                    sites.append(Site("GEN", f"{where}#{k}", _type_of(p), None, None, ret, _const_pointers(pts),
                                      f"{callee.name}({p.name})@{where}"))
            elif ins.indirect:
                sites.extend(_use_sites(program, fn, ins, where, bound, group, retbinds))
    return ContextCorpus(tuple(sites), level)


def _use_sites(program, fn, ins, where, bound, group, retbinds):
    pts = andersen_points_to(fn, ins.target[1:])
    fields = sorted(v for v in pts if isinstance(v, FieldValue))
    params = sorted(v for v in pts if isinstance(v, Param) and v.fn == fn.name)
    if fields:
        f = fields[0]
        decl = program.field_decl(f"{f.record}.{f.field}")
        bind = group(f.record, "USE") if bound(f.record, f.field) else None
        return [Site("USE", where, _type_of(decl), f.record, bind, None, (), f"{f.record}.{f.field}")]
    if params:
        p = fn.params[params[0].index]
        if p.name in retbinds.get(fn.name, ()):
            return [Site("USE", f"{where}@{caller.name}:{call.line}", _type_of(p), None, None,
                         f"{caller.name}:{call.line}", (), f"{fn.name}({p.name})@{caller.name}:{call.line}")
                    for caller, call in program.call_sites(fn.name)]
        return [Site("USE", where, _type_of(p), None, None, None, (), None)]
    return [Site("USE", where, "opaque", None, None, None, (), None)]

