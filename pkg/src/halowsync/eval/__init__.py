"""Metrics, FLOP accounting and report emission."""
from .conventional import conventional_cfo, conventional_detection
from .flops import (CONVENTIONAL_DETECTOR_PER_SAMPLE, PUBLISHED_CFO_FLOPS, FlopCount,
                    FlopsBreakdown, FlopsQuery, cfo_model_flops, conventional_cfo_flops,
                    detector_block_flops, detector_throughput_flops, layer_flops,
                    network_flops, relative_discrepancy)
from .metrics import MetricsReport, SnrBin, cfo_metrics, detection_metrics
from .report import CSV_COLUMNS, axis_extents, emit_report, parse_csv, report_csv, report_svg

__all__ = [
    "CONVENTIONAL_DETECTOR_PER_SAMPLE", "CSV_COLUMNS", "FlopCount", "FlopsBreakdown",
    "FlopsQuery", "MetricsReport", "PUBLISHED_CFO_FLOPS", "SnrBin", "axis_extents",
    "cfo_metrics", "cfo_model_flops", "conventional_cfo", "conventional_cfo_flops",
    "conventional_detection", "detection_metrics", "detector_block_flops",
    "detector_throughput_flops", "emit_report", "layer_flops", "network_flops",
    "parse_csv", "relative_discrepancy", "report_csv", "report_svg",
]
