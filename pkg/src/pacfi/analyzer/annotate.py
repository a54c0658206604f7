"""Greedy annotation placement until every context meets a precision level."""

from __future__ import annotations

from dataclasses import dataclass

from pacfi.analyzer.annotations import ObjBind, RetBind
from pacfi.analyzer.corpus import ContextCorpus, Level, allowed_targets, build_corpus
from pacfi.analyzer.diversity import DEFAULT_DEPTH_CAP, record_scores, retbind_params
from pacfi.analyzer.ir import IrProgram


@dataclass(frozen=True)
class AnnotationResult:
    annotations: tuple
    corpus: ContextCorpus
    residual: tuple[dict, ...] = ()
    diagnostics: tuple[str, ...] = ()

    @property
    def complete(self) -> bool:
        return not self.residual

    def text(self) -> str:
        return "".join(a.text() + "\n" for a in self.annotations)

    def to_payload(self) -> dict:
        return {
            "annotations": [a.text() for a in self.annotations],
            "residual": list(self.residual),
            "diagnostics": list(self.diagnostics),
        }


def _over(corpus: ContextCorpus, level: int) -> dict[str, int]:
    return {ctx: n for ctx, n in allowed_targets(corpus).items() if n > level}


def _over_fields(program: IrProgram, corpus: ContextCorpus, over) -> dict[str, list[str]]:
    """record -> its code-pointer fields whose contexts exceed the level."""
    hit: dict[str, set] = {}
    for s in corpus.sites:
        if s.owner and s.flow and corpus.context(s) in over:
            hit.setdefault(s.owner, set()).add(s.flow.partition(".")[2])
    out = {}
    for rec, fields in hit.items():
        rtype = program.record(rec)
        if rtype is not None:
            out[rec] = [f.name for f in rtype.fptr_fields if f.name in fields]
    return out


def _binding_field(program: IrProgram, record: str, pointers, depth_cap):
    """Highest-ds field that is not itself a bound pointer; declaration order breaks ties."""
    scores = record_scores(program, record, depth_cap)
    candidates = [r for r in scores if r.field not in pointers] or scores
    return candidates[0]


def annotate(program: IrProgram, precision_level: int, depth_cap: int | None = DEFAULT_DEPTH_CAP,
             level: Level = Level.RETBIND) -> AnnotationResult:
    """Annotate records by descending diversity score, then code-pointer parameters.

    Stops as soon as no context allows more than ``precision_level`` targets.
    Records whose best score is zero or one cannot be split by object binding;
    they are left in the residual report.
    """
    annotations: list = []
    diagnostics: list[str] = []
    groups: dict[str, int] = {}

    def corpus():
        return build_corpus(program, annotations, level, depth_cap, groups)

    cur = corpus()
    skipped: set[str] = set()
    while True:
        over = _over(cur, precision_level)
        if not over:
            break
        fields = _over_fields(program, cur, over)
        ranked = []
        for rec in sorted(set(fields) - skipped - {a.record for a in annotations if isinstance(a, ObjBind)}):
            best = _binding_field(program, rec, fields[rec], depth_cap)
            ranked.append((-best.ds, rec, best))
        ranked.sort(key=lambda t: (t[0], t[1]))
        pick = None
        for neg, rec, best in ranked:
            if best.ds <= 1:
                skipped.add(rec)
                diagnostics.append(f"{rec}: diversity score {best.ds} too low for objbind "
                                   f"(best field {best.field})")
                continue
            pick = (rec, best)
            break
        if pick is None:
            break
        rec, best = pick
        annotations.append(ObjBind(rec, best.field, tuple(fields[rec])))
        groups[rec] = best.ds
        cur = corpus()

    over = _over(cur, precision_level)
    if over:
        invoking = retbind_params(program)
        over_flows = {s.name.split("@")[0] for s in cur.use_sites if cur.context(s) in over}
        for fn_name in sorted(invoking):
            fn = program.function(fn_name)
            uses = {f"{fn_name}:{ins.line}" for ins in fn.body if ins.indirect}
            if uses & over_flows:
                annotations.append(RetBind(fn_name, invoking[fn_name]))
        cur = corpus()

    residual = []
    for ctx, n in sorted(_over(cur, precision_level).items()):
        names = sorted(s.name for s in cur.sites if cur.context(s) == ctx)
        residual.append({"context": ctx, "allowed": n, "sites": names})
    if residual:
        diagnostics.append(f"{len(residual)} context(s) still above {precision_level} allowed targets")
    return AnnotationResult(tuple(annotations), cur, tuple(residual), tuple(diagnostics))
