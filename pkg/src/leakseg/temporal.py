"""Temporal box filter: validate detections against recent history, back-fill
briefly vanished ones, and keep a bounded history of raw detections.

History holds the *raw* post-NMS detections of each processed frame, never
the filtered output: seeding history with filtered output can never
bootstrap from empty, so nothing would ever validate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import ScoredBox
from .imgops import box_iou

# Back-fill only engages once history is deeper than this (fixed gate; the
# scan window itself is params.k2).
BACKFILL_MIN_HISTORY = 3


@dataclass(frozen=True)
class TemporalParams:
    k1: int = 10
    n1: int = 1
    tau_iou1: float = 0.3
    tau_shift: float = 40.0
    k2: int = 3
    tau_iou2: float = 0.3
    ignore_large: float = 0.9
    history_cap: int = 10

    def __post_init__(self):
        if not self.k1 >= self.n1 >= 1:
            raise ValueError(f"need k1 >= n1 >= 1, got k1={self.k1} n1={self.n1}")
        if not (0.0 < self.tau_iou1 < 1.0 and 0.0 < self.tau_iou2 < 1.0):
            raise ValueError("IoU thresholds must lie in (0, 1)")
        if self.tau_shift <= 0.0:
            raise ValueError(f"tau_shift must be positive, got {self.tau_shift}")
        if self.k2 > self.history_cap:
            raise ValueError(f"k2={self.k2} exceeds history_cap={self.history_cap}")


@dataclass
class TemporalState:
    """Bounded ring (oldest -> newest) of per-frame raw detection lists."""

    history: list[list[ScoredBox]] = field(default_factory=list)


def push_history(state: TemporalState, raw_detections: list[ScoredBox],
                 params: TemporalParams) -> TemporalState:
    """Append one frame's raw detections, evicting the oldest past the cap."""
    state.history.append(list(raw_detections))
    while len(state.history) > params.history_cap:
        state.history.pop(0)
    return state


def _shift_match(a: ScoredBox, b: ScoredBox, tau_shift: float) -> bool:
    return (
        abs(a.box.x1 - b.box.x1) < tau_shift
        and abs(a.box.y1 - b.box.y1) < tau_shift
        and abs(a.box.x2 - b.box.x2) < tau_shift
        and abs(a.box.y2 - b.box.y2) < tau_shift
    )


def temporal_filter(
    current: list[ScoredBox],
    state: TemporalState,
    image_size: tuple[int, int],
    params: TemporalParams,
) -> list[ScoredBox]:
    """Filter the current frame's boxes against recent history.

    1. Size gate: boxes covering more than ignore_large of the image are
       dropped outright.
    2. Forward validation: a box is valid iff at least n1 of the last k1
       history frames contain a box matching it, where a frame matches when
       some box overlaps with IoU > tau_iou1 or sits within tau_shift on all
       four coordinates.
    3. Back-fill: only when nothing validated and history is deep enough,
       boxes from the last k2 frames that re-occur across a frame pair
       (IoU > tau_iou2) are emitted instead, deduplicated by coordinates.
    """
    width, height = image_size
    image_area = float(width) * float(height)

    valid: list[ScoredBox] = []
    window = state.history[-params.k1:]
    for cand in current:
        if cand.box.area() > image_area * params.ignore_large:
            continue
        matched_frames = 0
        for past_frame in window:
            hit = any(
                box_iou(cand.box, past.box) > params.tau_iou1
                or _shift_match(cand, past, params.tau_shift)
                for past in past_frame
            )
            if hit:
                matched_frames += 1
        if matched_frames >= params.n1:
            valid.append(cand)

    if valid or len(state.history) <= BACKFILL_MIN_HISTORY:
        return valid

    recent = state.history[-params.k2:]
    backfilled: list[ScoredBox] = []
    seen: set[tuple[float, float, float, float]] = set()
    for i, first in enumerate(recent):
        for j, second in enumerate(recent):
            if i == j:
                continue
            for cand in first:
                if any(box_iou(cand.box, other.box) > params.tau_iou2
                       for other in second):
                    key = (cand.box.x1, cand.box.y1, cand.box.x2, cand.box.y2)
                    if key not in seen:
                        seen.add(key)
                        backfilled.append(cand)
    return backfilled
