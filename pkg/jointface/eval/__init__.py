"""
JointFace — Evaluation Package
Re-exports for convenience.
"""
from jointface.eval.ablation import VARIANTS, AblationResult, run_ablation
from jointface.eval.correlation import CorrelationMap, correlate_model, pearson_map
from jointface.eval.export import EmbeddingTable, export_embeddings, import_embeddings
from jointface.eval.metrics import RegionErrorReport, RegionErrors, evaluate_model, merge_reports, region_mae
from jointface.eval.reports import format_table, read_report, write_report
