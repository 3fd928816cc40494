"""Optional reproduction presets against a full benchmark dataset and a live
inference service. Skipped unless both LEAKSEG_DATASET_ROOT (directory
containing manifest.csv) and LEAKSEG_SERVICE (service endpoint) are set;
these runs need GPU-backed detector/segmenter models and are not desk-scale.
"""

import os

import pytest

from leakseg.core import load_manifest
from leakseg.evaluation import CATEGORY_OVERALL
from leakseg.pipeline import ablation_presets, run_dataset

DATASET_ROOT = os.environ.get("LEAKSEG_DATASET_ROOT")
SERVICE = os.environ.get("LEAKSEG_SERVICE")

pytestmark = pytest.mark.skipif(
    not (DATASET_ROOT and SERVICE),
    reason="reproduction needs LEAKSEG_DATASET_ROOT and LEAKSEG_SERVICE",
)


@pytest.fixture(scope="module")
def preset_scores():
    manifest = load_manifest(os.path.join(DATASET_ROOT, "manifest.csv"))
    scores = {}
    for name, cfg in ablation_presets():
        cfg.detect.backend = "remote"
        cfg.detect.endpoint = SERVICE
        if cfg.segment.mode == "promptable":
            cfg.segment.backend = "remote"
            cfg.segment.endpoint = SERVICE
        result = run_dataset(manifest, cfg, label=name)
        scores[name] = result.reports[CATEGORY_OVERALL].mean_iou
    return scores


def test_bgs_baseline_reproduces(preset_scores):
    assert preset_scores["bgs_only"] == pytest.approx(0.50, abs=0.05)


def test_full_method_reproduces(preset_scores):
    assert preset_scores["full"] == pytest.approx(0.69, abs=0.05)


def test_component_ordering_holds(preset_scores):
    # The ordering must survive even if absolute values drift.
    assert preset_scores["full"] > preset_scores["no_temporal"]
    assert preset_scores["no_temporal"] > preset_scores["bgs_only"]
    assert preset_scores["bgs_only"] > preset_scores["no_bgs"]
