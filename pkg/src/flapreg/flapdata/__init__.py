"""Flap-test log reduction: synchronization, cycle segmentation, lift metrics."""

from .align import AlignedPair, align
from .metrics import CycleMetrics, cycle_metrics
from .records import (AngleRecord, ForceRecord, read_angle_csv, read_force_csv,
                      write_angle_csv, write_force_csv)
from .segment import FlapCycle, segment_cycles
from .summary import ConditionSummary, TrialInput, TrialResult, load_manifest, summarize

__all__ = [
    "AlignedPair", "AngleRecord", "ConditionSummary", "CycleMetrics", "FlapCycle",
    "ForceRecord", "TrialInput", "TrialResult", "align", "cycle_metrics", "load_manifest",
    "read_angle_csv", "read_force_csv", "segment_cycles", "summarize",
    "write_angle_csv", "write_force_csv",
]
