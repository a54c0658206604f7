"""Context analyzer: diversity scores, retbind candidates and precision reports."""

from pacfi.analyzer.annotate import AnnotationResult, annotate
from pacfi.analyzer.annotations import (
    AnnotationError,
    ObjBind,
    RetBind,
    format_annotations,
    parse_annotation,
    parse_annotations,
)
from pacfi.analyzer.corpus import (
    ContextCorpus,
    ContextStats,
    Level,
    Site,
    allowed_targets,
    build_corpus,
    context_id,
    format_precision,
    precision_report,
    random_corpus,
    typesig_hash,
)
from pacfi.analyzer.diversity import (
    DEFAULT_DEPTH_CAP,
    DiversityReport,
    SiteHit,
    Unresolved,
    estimate_diversity_score,
    find_retbind_candidates,
    record_scores,
    retbind_params,
)
from pacfi.analyzer.ir import FieldDecl, Function, Instr, IrError, IrProgram, RecordType, format_ir, parse_ir
from pacfi.analyzer.pointsto import (
    HEAP_ALLOCATORS,
    Const,
    FieldValue,
    HeapAddr,
    Param,
    StackAddr,
    Unknown,
    andersen_points_to,
    check_pts,
    expand_points_to,
    format_pts,
)

__all__ = [
    "AnnotationError", "AnnotationResult", "Const", "ContextCorpus", "ContextStats", "DEFAULT_DEPTH_CAP",
    "DiversityReport", "FieldDecl", "FieldValue", "Function", "HEAP_ALLOCATORS", "HeapAddr", "Instr",
    "IrError", "IrProgram", "Level", "ObjBind", "Param", "RecordType", "RetBind", "Site", "SiteHit",
    "StackAddr", "Unknown", "Unresolved", "allowed_targets", "andersen_points_to", "annotate",
    "build_corpus", "check_pts", "context_id", "estimate_diversity_score", "expand_points_to",
    "find_retbind_candidates", "format_annotations", "format_ir", "format_precision", "format_pts",
    "parse_annotation", "parse_annotations", "parse_ir", "precision_report", "random_corpus",
    "record_scores", "retbind_params", "typesig_hash",
]
