"""Python access to the histopathology pipeline core."""

import json

from ._core import (
    HistoError,
    apportion,
    augment,
    check_compute_constraint,
    compound_scale,
    confusion_matrix,
    grid_count,
    layer_count,
    majority_vote,
    read_png,
    rotate,
    split,
    step_lr,
    tile,
    write_png,
)
from . import _core


def architecture(phi):
    """Block table of the scaled network as a dict."""
    return json.loads(_core.architecture_json(phi))


def metrics_report(matrix):
    """Per-class precision/recall/F1, macro averages and accuracy for a 4x4 matrix."""
    return json.loads(_core.metrics_report_json(matrix))


__all__ = [
    "HistoError",
    "apportion",
    "architecture",
    "augment",
    "check_compute_constraint",
    "compound_scale",
    "confusion_matrix",
    "grid_count",
    "layer_count",
    "majority_vote",
    "metrics_report",
    "read_png",
    "rotate",
    "split",
    "step_lr",
    "tile",
    "write_png",
]
