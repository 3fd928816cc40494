"""End-to-end per-video orchestration, dataset runs, sweeps, ablation presets.

Every frame feeds the background model; detection and all later stages
(including evaluation) run only on frames whose index is a multiple of the
stride. History receives entries only on those frames, so a lookback of k1
processed entries spans k1 * stride raw frames.
"""

from __future__ import annotations

import copy
import csv
import io
import itertools
import json
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bgs import (ALPHA_MAX, BgsParams, DiffImage, abs_diff, adaptive_alpha,
                  baseline_mask, bgs_init, bgs_update, BGS_METHODS, enhance)
from .core import (BinaryMask, LeaksegError, Manifest, VideoClip,
                   load_clip, write_mask)
from .detect import (DetectorError, DetectorQuery, OracleDetector,
                     RemoteDetector, detect, nms)
from .evaluation import (CATEGORY_OVERALL, CATEGORY_WITH, CATEGORY_WITHOUT,
                         CategoryReport, VideoMetrics, aggregate,
                         frame_confusion, video_scores)
from .imgops import StructuringElement
from .segment import (MockSegmenter, RemoteSegmenter, segment_promptable,
                      segment_traditional)
from .temporal import TemporalParams, TemporalState, push_history, temporal_filter

REPORT_HEADER = ["config", "category", "videos", "iou", "precision", "recall", "fla"]
PER_VIDEO_HEADER = ["config", "video", "category", "frames", "iou", "precision",
                    "recall", "fla"]

# Evaluated frames satisfy index % stride == STRIDE_PHASE. Phase 0 means the
# very first frame is evaluated (before any background warm-up).
STRIDE_PHASE = 0

# Built-in positive-prompt comparison set for prompt sweeps.
PROMPT_CANDIDATES = [
    "white gas",
    "white plume",
    "white steam",
    "white methane leak on black background in the infrared image",
    "methane gas leak",
    "gas leak",
    "white smoke",
]


class PipelineError(LeaksegError):
    pass


@dataclass
class BgsConfig:
    enabled: bool = True
    method: str = "mog2"
    history: int = 30
    mog2_components: int = 5
    mog2_match_threshold: float = 16.0
    mog2_bg_ratio: float = 0.9
    mog2_var_init: float = 15.0
    mog2_var_min: float = 4.0
    mog2_var_max: float = 75.0
    learning_rate: float = 0.0
    knn_samples: int = 0
    knn_radius2: float = 400.0
    knn_neighbors: int = 2
    seed: int = 7


@dataclass
class EnhanceConfig:
    adaptive: bool = True
    fixed_alpha: float = 15.0
    max_alpha: float = ALPHA_MAX


@dataclass
class BaselineConfig:
    scale: float = 15.0
    threshold: float = 40.0
    open_kernel: int = 3
    close_kernel: int = 0  # 0 disables closing


@dataclass
class DetectConfig:
    enabled: bool = True
    positive_prompt: str = "white steam"
    negative_prompt: str = "white human, car, bird, bike, and other objects"
    tau_vlm: float = 0.12
    nms_iou: float = 0.5
    backend: str = "oracle"  # oracle | scripted | remote
    endpoint: str = "http://127.0.0.1:8750"
    timeout: float = 30.0
    min_component: int = 4  # oracle backend: ignore GT blobs smaller than this


@dataclass
class TemporalConfig:
    enabled: bool = True
    k1: int = 10
    n1: int = 1
    tau_iou1: float = 0.3
    tau_shift: float = 40.0
    k2: int = 3
    tau_iou2: float = 0.3
    ignore_large: float = 0.9
    history_cap: int = 10


@dataclass
class SegmentConfig:
    mode: str = "traditional"  # traditional | promptable
    backend: str = "mock"      # mock | remote (promptable mode only)
    endpoint: str = "http://127.0.0.1:8750"
    timeout: float = 60.0
    image_source: str = "diff"  # diff | frame
    open_kernel: int = 3
    close_kernel: int = 0


@dataclass
class EvalConfig:
    stride: int = 5
    gt_threshold: int = 127


@dataclass
class DatasetConfig:
    manifest: str = ""


@dataclass
class PipelineConfig:
    bgs: BgsConfig = field(default_factory=BgsConfig)
    enhance: EnhanceConfig = field(default_factory=EnhanceConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    detect: DetectConfig = field(default_factory=DetectConfig)
    temporal: TemporalConfig = field(default_factory=TemporalConfig)
    segment: SegmentConfig = field(default_factory=SegmentConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)


_SECTIONS = [
    ("bgs", BgsConfig),
    ("enhance", EnhanceConfig),
    ("baseline", BaselineConfig),
    ("detect", DetectConfig),
    ("temporal", TemporalConfig),
    ("segment", SegmentConfig),
    ("eval", EvalConfig),
    ("dataset", DatasetConfig),
]

_PARSERS = {
    "int": int,
    "float": float,
    "str": str,
}


def _parse_bool(text: str) -> bool:
    if text == "true":
        return True
    if text == "false":
        return False
    raise ValueError(f"expected true/false, got {text!r}")


_PARSERS["bool"] = _parse_bool


def config_registry() -> dict[str, tuple[str, str, str]]:
    """Flat dotted config keys -> (section attr, field name, type name)."""
    registry: dict[str, tuple[str, str, str]] = {}
    for section, cls in _SECTIONS:
        for f in dataclasses.fields(cls):
            registry[f"{section}.{f.name}"] = (section, f.name, f.type)
    return registry


_REGISTRY = config_registry()


def default_config() -> PipelineConfig:
    return PipelineConfig()


def set_config_value(cfg: PipelineConfig, key: str, raw_value: str) -> None:
    if key not in _REGISTRY:
        raise PipelineError(f"unknown config key {key!r}")
    section, name, type_name = _REGISTRY[key]
    try:
        value = _PARSERS[type_name](raw_value)
    except ValueError as exc:
        raise PipelineError(f"bad value for {key}: {exc}") from exc
    setattr(getattr(cfg, section), name, value)


def apply_overrides(cfg: PipelineConfig, overrides: dict[str, str]) -> PipelineConfig:
    for key, value in overrides.items():
        set_config_value(cfg, key, value)
    return cfg


def parse_config_text(text: str) -> dict[str, str]:
    """Parse flat `key=value` lines; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PipelineError(f"config line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def config_from_file(path: str | Path) -> PipelineConfig:
    cfg = default_config()
    apply_overrides(cfg, parse_config_text(Path(path).read_text()))
    validate_config(cfg)
    return cfg


def validate_config(cfg: PipelineConfig) -> None:
    if cfg.eval.stride < 1:
        raise PipelineError(f"eval.stride must be >= 1, got {cfg.eval.stride}")
    if not 0 <= cfg.eval.gt_threshold <= 255:
        raise PipelineError("eval.gt_threshold must lie in [0, 255]")
    if cfg.bgs.method not in BGS_METHODS:
        raise PipelineError(f"unknown bgs.method {cfg.bgs.method!r}")
    if cfg.bgs.history < 1:
        raise PipelineError("bgs.history must be >= 1")
    if not 0.0 < cfg.enhance.fixed_alpha <= ALPHA_MAX:
        raise PipelineError(f"enhance.fixed_alpha must lie in (0, {ALPHA_MAX}]")
    if not 0.0 < cfg.enhance.max_alpha <= ALPHA_MAX:
        raise PipelineError(f"enhance.max_alpha must lie in (0, {ALPHA_MAX}]")
    if cfg.baseline.scale <= 0:
        raise PipelineError("baseline.scale must be positive")
    if cfg.baseline.open_kernel < 0 or cfg.baseline.close_kernel < 0:
        raise PipelineError("baseline kernels must be >= 0 (0 disables)")
    if not cfg.detect.enabled and not cfg.bgs.enabled:
        raise PipelineError("bgs and detection cannot both be disabled")
    if cfg.detect.backend not in ("oracle", "scripted", "remote"):
        raise PipelineError(f"unknown detect.backend {cfg.detect.backend!r}")
    if cfg.segment.mode not in ("traditional", "promptable"):
        raise PipelineError(f"unknown segment.mode {cfg.segment.mode!r}")
    if cfg.segment.backend not in ("mock", "remote"):
        raise PipelineError(f"unknown segment.backend {cfg.segment.backend!r}")
    if cfg.segment.image_source not in ("diff", "frame"):
        raise PipelineError(f"unknown segment.image_source {cfg.segment.image_source!r}")
    if cfg.segment.open_kernel < 0 or cfg.segment.close_kernel < 0:
        raise PipelineError("segment kernels must be >= 0 (0 disables)")
    if not 0.0 <= cfg.detect.nms_iou <= 1.0:
        raise PipelineError("detect.nms_iou must lie in [0, 1]")
    # Delegated range checks.
    DetectorQuery(cfg.detect.positive_prompt, cfg.detect.negative_prompt,
                  cfg.detect.tau_vlm)
    temporal_params_from_config(cfg)


def bgs_params_from_config(cfg: PipelineConfig) -> BgsParams:
    b = cfg.bgs
    return BgsParams(
        method=b.method, history=b.history, mog2_components=b.mog2_components,
        mog2_match_threshold=b.mog2_match_threshold, mog2_bg_ratio=b.mog2_bg_ratio,
        mog2_var_init=b.mog2_var_init, mog2_var_min=b.mog2_var_min,
        mog2_var_max=b.mog2_var_max, learning_rate=b.learning_rate,
        knn_samples=b.knn_samples, knn_radius2=b.knn_radius2,
        knn_neighbors=b.knn_neighbors, seed=b.seed,
    )


def temporal_params_from_config(cfg: PipelineConfig) -> TemporalParams:
    t = cfg.temporal
    return TemporalParams(
        k1=t.k1, n1=t.n1, tau_iou1=t.tau_iou1, tau_shift=t.tau_shift,
        k2=t.k2, tau_iou2=t.tau_iou2, ignore_large=t.ignore_large,
        history_cap=t.history_cap,
    )


def query_from_config(cfg: PipelineConfig) -> DetectorQuery:
    return DetectorQuery(
        positive_prompt=cfg.detect.positive_prompt,
        negative_prompt=cfg.detect.negative_prompt,
        tau_vlm=cfg.detect.tau_vlm,
    )


def _se(k: int) -> StructuringElement | None:
    return StructuringElement.square(k) if k > 0 else None


def make_detector(cfg: PipelineConfig, clip: VideoClip):
    if cfg.detect.backend == "oracle":
        if clip.gt is None:
            raise PipelineError(f"{clip.id}: oracle detector needs ground truth")
        return OracleDetector(clip.gt, min_component=cfg.detect.min_component)
    if cfg.detect.backend == "remote":
        return RemoteDetector(cfg.detect.endpoint, timeout=cfg.detect.timeout)
    raise PipelineError("scripted detector must be passed to run_video directly")


def make_segmenter(cfg: PipelineConfig):
    if cfg.segment.mode != "promptable":
        return None
    if cfg.segment.backend == "mock":
        return MockSegmenter()
    return RemoteSegmenter(cfg.segment.endpoint, timeout=cfg.segment.timeout)


@dataclass
class VideoResult:
    video_id: str
    masks: dict[int, BinaryMask]
    boxes: dict[int, list]
    metrics: VideoMetrics | None
    # Background estimate after the final frame; lets tests check that
    # detection stages never perturb the background model.
    last_background: np.ndarray | None = None


def run_video(
    clip: VideoClip,
    cfg: PipelineConfig,
    detector=None,
    segmenter=None,
    want_metrics: bool = True,
) -> VideoResult:
    """Process one clip: BGS every frame, detection stack on strided frames."""
    if want_metrics and clip.gt is None:
        raise PipelineError(f"{clip.id}: metrics requested but clip has no ground truth")
    if not cfg.detect.enabled and not cfg.bgs.enabled:
        raise PipelineError("bgs and detection cannot both be disabled")

    bgs_state = bgs_init(cfg.bgs.method, bgs_params_from_config(cfg)) \
        if cfg.bgs.enabled else None
    if cfg.detect.enabled and detector is None:
        detector = make_detector(cfg, clip)
    if cfg.detect.enabled and cfg.segment.mode == "promptable" and segmenter is None:
        segmenter = make_segmenter(cfg)

    query = query_from_config(cfg) if cfg.detect.enabled else None
    tparams = temporal_params_from_config(cfg)
    tstate = TemporalState()
    stride = cfg.eval.stride
    metrics = VideoMetrics() if want_metrics else None
    masks: dict[int, BinaryMask] = {}
    boxes_out: dict[int, list] = {}

    for frame in clip.frames:
        background = bgs_update(bgs_state, frame) if bgs_state is not None else None
        if frame.index % stride != STRIDE_PHASE:
            continue
        try:
            if not cfg.detect.enabled:
                raw = abs_diff(frame, background)
                mask = baseline_mask(
                    raw, scale=cfg.baseline.scale, threshold=cfg.baseline.threshold,
                    open_se=_se(cfg.baseline.open_kernel),
                    close_se=_se(cfg.baseline.close_kernel),
                )
                final_boxes = []
            else:
                if cfg.bgs.enabled:
                    raw = abs_diff(frame, background)
                    if cfg.enhance.adaptive:
                        alpha = min(adaptive_alpha(raw), cfg.enhance.max_alpha)
                    else:
                        alpha = cfg.enhance.fixed_alpha
                    det_img = enhance(raw, alpha)
                else:
                    raw = DiffImage(frame.pixels.copy())
                    det_img = enhance(raw, cfg.enhance.fixed_alpha)

                candidates = detect(detector, det_img, query, frame.index)
                kept = nms(candidates, cfg.detect.nms_iou)
                if cfg.temporal.enabled:
                    final_boxes = temporal_filter(
                        kept, tstate, (clip.width, clip.height), tparams
                    )
                    push_history(tstate, kept, tparams)
                else:
                    final_boxes = kept

                if cfg.segment.mode == "traditional":
                    # traditional segmentation always reads the enhanced
                    # difference; image_source only steers the promptable path
                    mask = segment_traditional(
                        det_img, final_boxes,
                        open_se=_se(cfg.segment.open_kernel),
                        close_se=_se(cfg.segment.close_kernel),
                    )
                else:
                    if cfg.segment.image_source == "diff":
                        seg_img = det_img
                    else:
                        seg_img = DiffImage(frame.pixels.copy())
                    mask = segment_promptable(segmenter, seg_img, final_boxes)
        except DetectorError as exc:
            raise PipelineError(
                f"{clip.id}: backend failure at frame {frame.index}: {exc}"
            ) from exc

        masks[frame.index] = mask
        boxes_out[frame.index] = final_boxes
        if metrics is not None:
            tp, fp, fn, (pred_pos, gt_pos) = frame_confusion(
                mask, clip.gt[frame.index]
            )
            metrics.add(tp, fp, fn, pred_pos, gt_pos)

    return VideoResult(
        video_id=clip.id, masks=masks, boxes=boxes_out, metrics=metrics,
        last_background=None if background is None else background.pixels,
    )


@dataclass
class VideoRow:
    video_id: str
    has_interference: bool
    metrics: VideoMetrics


@dataclass
class DatasetResult:
    label: str
    rows: list[VideoRow]
    reports: dict[str, CategoryReport | None]


def _dump_video(dump_dir: Path, result: VideoResult) -> None:
    vid_dir = dump_dir / result.video_id
    mask_dir = vid_dir / "masks"
    mask_dir.mkdir(parents=True, exist_ok=True)
    for idx, mask in sorted(result.masks.items()):
        write_mask(mask, mask_dir / f"{idx:06d}.png")
    boxes = {
        str(idx): [
            [b.box.x1, b.box.y1, b.box.x2, b.box.y2, b.score, b.query_index]
            for b in blist
        ]
        for idx, blist in sorted(result.boxes.items())
    }
    (vid_dir / "boxes.json").write_text(json.dumps(boxes, indent=0, sort_keys=True))


def run_dataset(
    manifest: Manifest,
    cfg: PipelineConfig,
    label: str = "run",
    allow_missing_gt: bool = False,
    dump_dir: str | Path | None = None,
    segmenter=None,
) -> DatasetResult:
    """Run every non-excluded manifest entry and aggregate per category."""
    entries = manifest.active_entries()
    if not entries:
        raise PipelineError("manifest has no evaluable entries")
    if manifest.root is None:
        raise PipelineError("manifest has no dataset root")
    dump_path = Path(dump_dir) if dump_dir is not None else None

    rows: list[VideoRow] = []
    for entry in entries:
        clip = load_clip(manifest.root, entry, gt_threshold=cfg.eval.gt_threshold)
        want = clip.gt is not None
        if not want and not allow_missing_gt:
            raise PipelineError(f"{entry.id}: no ground truth (use allow_missing_gt)")
        result = run_video(clip, cfg, segmenter=segmenter, want_metrics=want)
        if dump_path is not None:
            _dump_video(dump_path, result)
        if want:
            rows.append(VideoRow(entry.id, clip.has_interference, result.metrics))

    if not rows:
        raise PipelineError("no scorable videos (ground truth missing everywhere)")
    reports = aggregate([(r.metrics, r.has_interference) for r in rows])
    return DatasetResult(label=label, rows=rows, reports=reports)


def report_csv(results: list[DatasetResult]) -> str:
    """Category-level CSV; one row per (config, non-empty category)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for res in results:
        for cat in (CATEGORY_WITHOUT, CATEGORY_WITH, CATEGORY_OVERALL):
            rep = res.reports.get(cat)
            if rep is None:
                continue
            writer.writerow([
                res.label, cat, rep.videos,
                f"{rep.mean_iou:.6f}", f"{rep.mean_precision:.6f}",
                f"{rep.mean_recall:.6f}", f"{rep.mean_fla:.6f}",
            ])
    return out.getvalue()


def per_video_csv(results: list[DatasetResult]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(PER_VIDEO_HEADER)
    for res in results:
        for row in res.rows:
            iou, precision, recall, fla = video_scores(row.metrics)
            category = CATEGORY_WITH if row.has_interference else CATEGORY_WITHOUT
            writer.writerow([
                res.label, row.video_id, category, row.metrics.frames_evaluated,
                f"{iou:.6f}", f"{precision:.6f}", f"{recall:.6f}", f"{fla:.6f}",
            ])
    return out.getvalue()


@dataclass
class SweepSpec:
    base: PipelineConfig
    axes: dict[str, list[str]]
    cap: int = 512

    def __post_init__(self):
        if not self.axes:
            raise PipelineError("sweep needs at least one axis")
        for key in self.axes:
            if key not in _REGISTRY:
                raise PipelineError(f"sweep axis {key!r} is not a config key")
            if not self.axes[key]:
                raise PipelineError(f"sweep axis {key!r} has no values")


def parse_sweep_file(path: str | Path,
                     base: PipelineConfig | None = None) -> SweepSpec:
    """Sweep file: normal `key=value` lines for the base config, plus
    `sweep.<key> = v1; v2; v3` axis lines (semicolons so prompts may contain
    commas) and an optional `sweep.cap = N`."""
    base = base or default_config()
    axes: dict[str, list[str]] = {}
    cap = 512
    for key, value in parse_config_text(Path(path).read_text()).items():
        if key == "sweep.cap":
            cap = int(value)
        elif key.startswith("sweep."):
            axes[key[len("sweep."):]] = [v.strip() for v in value.split(";") if v.strip()]
        else:
            set_config_value(base, key, value)
    validate_config(base)
    return SweepSpec(base=base, axes=axes, cap=cap)


def run_sweep(
    spec: SweepSpec,
    manifest: Manifest,
    allow_missing_gt: bool = False,
) -> list[DatasetResult]:
    """One run_dataset per cartesian axis point, lexicographic by axis name."""
    keys = sorted(spec.axes)
    sizes = [len(spec.axes[k]) for k in keys]
    total = int(np.prod(sizes)) if sizes else 0
    if total > spec.cap:
        raise PipelineError(f"sweep size {total} exceeds cap {spec.cap}")
    results: list[DatasetResult] = []
    for combo in itertools.product(*(spec.axes[k] for k in keys)):
        cfg = copy.deepcopy(spec.base)
        for key, value in zip(keys, combo):
            set_config_value(cfg, key, value)
        validate_config(cfg)
        label = ";".join(f"{k}={v}" for k, v in zip(keys, combo))
        results.append(run_dataset(manifest, cfg, label=label,
                                   allow_missing_gt=allow_missing_gt))
    return results


def ablation_presets() -> list[tuple[str, PipelineConfig]]:
    """The five component-ablation configurations.

    1. bgs_only        - best BGS-only baseline (MOG2, opening + closing 50).
    2. no_temporal     - detection + promptable segmentation, tau 0.09.
    3. no_bgs          - detector on the fixed-gain (1.5x) raw frame, tau 0.19.
    4. traditional_seg - full chain with Otsu + morphology segmentation, tau 0.12.
    5. full            - full chain with promptable segmentation, tau 0.12.
    """
    presets: list[tuple[str, PipelineConfig]] = []

    cfg = default_config()
    cfg.detect.enabled = False
    cfg.baseline.close_kernel = 50
    presets.append(("bgs_only", cfg))

    cfg = default_config()
    cfg.temporal.enabled = False
    cfg.detect.tau_vlm = 0.09
    cfg.segment.mode = "promptable"
    presets.append(("no_temporal", cfg))

    cfg = default_config()
    cfg.bgs.enabled = False
    cfg.enhance.adaptive = False
    cfg.enhance.fixed_alpha = 1.5
    cfg.detect.tau_vlm = 0.19
    cfg.segment.mode = "promptable"
    presets.append(("no_bgs", cfg))

    cfg = default_config()
    cfg.detect.tau_vlm = 0.12
    cfg.segment.mode = "traditional"
    presets.append(("traditional_seg", cfg))

    cfg = default_config()
    cfg.detect.tau_vlm = 0.12
    cfg.segment.mode = "promptable"
    presets.append(("full", cfg))

    return presets
