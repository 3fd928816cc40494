"""Domain types, frame/mask file IO, and dataset manifest handling."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

# Soft ground truth is distributed un-thresholded; binarize at > this value.
GT_BINARY_THRESHOLD = 127

MANIFEST_HEADER = "id,path,has_interference,excluded"


class LeaksegError(Exception):
    """Base class for package errors."""


class DatasetError(LeaksegError):
    """A clip directory violates the dataset layout."""


class MissingDirectoryError(DatasetError):
    pass


class CountMismatchError(DatasetError):
    pass


class DimensionMismatchError(DatasetError):
    pass


class ManifestError(LeaksegError):
    """Manifest text is malformed."""


@dataclass
class Frame:
    """One 8-bit grayscale video frame; `index` is its 0-based ordinal."""

    index: int
    pixels: np.ndarray  # (H, W) uint8, row-major

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels)
        if self.pixels.ndim != 2 or self.pixels.dtype != np.uint8:
            raise ValueError("frame pixels must be a 2-D uint8 array")
        if min(self.pixels.shape) < 1:
            raise ValueError("frame dimensions must be positive")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class BinaryMask:
    """Per-pixel boolean mask with the same layout as Frame."""

    bits: np.ndarray  # (H, W) bool

    def __post_init__(self):
        self.bits = np.asarray(self.bits)
        if self.bits.ndim != 2 or self.bits.dtype != np.bool_:
            raise ValueError("mask bits must be a 2-D bool array")

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(
            np.array_equal(self.bits, other.bits)
        )


@dataclass(frozen=True)
class BBox:
    """Axis-aligned pixel-space box; sub-pixel coordinates allowed."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box {self}")

    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def clipped(self, width: float, height: float) -> "BBox | None":
        """Clip to [0, width] x [0, height]; None if nothing remains."""
        x1 = min(max(self.x1, 0.0), float(width))
        y1 = min(max(self.y1, 0.0), float(height))
        x2 = min(max(self.x2, 0.0), float(width))
        y2 = min(max(self.y2, 0.0), float(height))
        if x1 >= x2 or y1 >= y2:
            return None
        return BBox(x1, y1, x2, y2)


@dataclass(frozen=True)
class ScoredBox:
    """Detector output; query_index 0 = positive prompt, 1 = negative."""

    box: BBox
    score: float
    query_index: int = 0

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        if self.query_index not in (0, 1):
            raise ValueError(f"query_index must be 0 or 1, got {self.query_index}")


@dataclass
class VideoClip:
    """An ordered frame sequence with optional paired ground-truth masks."""

    id: str
    frames: list[Frame]
    gt: list[BinaryMask] | None = None
    has_interference: bool = False

    def __post_init__(self):
        if not self.frames:
            raise ValueError("clip must contain at least one frame")
        shape = self.frames[0].pixels.shape
        for f in self.frames:
            if f.pixels.shape != shape:
                raise DimensionMismatchError(
                    f"clip {self.id}: frame {f.index} shape {f.pixels.shape} != {shape}"
                )
        if self.gt is not None:
            if len(self.gt) != len(self.frames):
                raise CountMismatchError(
                    f"clip {self.id}: {len(self.frames)} frames vs {len(self.gt)} gt masks"
                )
            for i, m in enumerate(self.gt):
                if m.bits.shape != shape:
                    raise DimensionMismatchError(
                        f"clip {self.id}: gt {i} shape {m.bits.shape} != {shape}"
                    )

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    path: str
    has_interference: bool
    excluded: bool = False


@dataclass
class Manifest:
    root: Path | None
    entries: list[ManifestEntry] = field(default_factory=list)

    def active_entries(self) -> list[ManifestEntry]:
        """Entries that participate in evaluation (excluded rows dropped)."""
        return [e for e in self.entries if not e.excluded]


def _parse_bool(token: str, context: str) -> bool:
    if token == "true":
        return True
    if token == "false":
        return False
    raise ManifestError(f"{context}: expected lowercase true/false, got {token!r}")


def parse_manifest(text: str) -> Manifest:
    """Parse manifest text: one header line, then `id,path,has_interference,excluded` rows."""
    stripped = text.strip()
    if not stripped:
        return Manifest(root=None, entries=[])
    lines = stripped.splitlines()
    if lines[0].strip() != MANIFEST_HEADER:
        raise ManifestError(f"bad manifest header {lines[0]!r}")
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for lineno, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 4:
            raise ManifestError(f"line {lineno}: expected 4 fields, got {len(row)}")
        vid, path, interference, excluded = (c.strip() for c in row)
        if not vid:
            raise ManifestError(f"line {lineno}: empty video id")
        if vid in seen:
            raise ManifestError(f"line {lineno}: duplicate video id {vid!r}")
        seen.add(vid)
        entries.append(
            ManifestEntry(
                id=vid,
                path=path,
                has_interference=_parse_bool(interference, f"line {lineno}"),
                excluded=_parse_bool(excluded, f"line {lineno}"),
            )
        )
    return Manifest(root=None, entries=entries)


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    manifest = parse_manifest(path.read_text())
    manifest.root = path.parent
    return manifest


def manifest_text(manifest: Manifest) -> str:
    out = io.StringIO()
    out.write(MANIFEST_HEADER + "\n")
    writer = csv.writer(out, lineterminator="\n")
    for e in manifest.entries:
        writer.writerow(
            [e.id, e.path, str(e.has_interference).lower(), str(e.excluded).lower()]
        )
    return out.getvalue()


def read_gray(path: str | Path) -> np.ndarray:
    """Load an image file as a (H, W) uint8 array."""
    try:
        with Image.open(path) as img:
            if img.mode != "L":
                img = img.convert("L")
            return np.asarray(img, dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise DatasetError(f"cannot read image {path}: {exc}") from exc


def write_gray(arr: np.ndarray, path: str | Path) -> None:
    arr = np.asarray(arr, dtype=np.uint8)
    try:
        Image.fromarray(arr, mode="L").save(path)
    except OSError as exc:
        raise DatasetError(f"cannot write image {path}: {exc}") from exc


def write_mask(mask: BinaryMask, path: str | Path) -> None:
    write_gray(mask.bits.astype(np.uint8) * 255, path)


def read_mask(path: str | Path, threshold: int = GT_BINARY_THRESHOLD) -> BinaryMask:
    return BinaryMask(read_gray(path) > threshold)


def write_frame(frame: Frame, path: str | Path) -> None:
    write_gray(frame.pixels, path)


def load_clip(
    root: str | Path,
    entry: ManifestEntry,
    gt_threshold: int = GT_BINARY_THRESHOLD,
) -> VideoClip:
    """Load `<root>/<entry.path>/frames/*.png` (+ optional `gt/`) as a VideoClip.

    Frames are sorted by filename; gt masks are binarized at > gt_threshold.
    """
    clip_dir = Path(root) / entry.path
    frames_dir = clip_dir / "frames"
    if not frames_dir.is_dir():
        raise MissingDirectoryError(f"missing frames directory {frames_dir}")
    frame_files = sorted(frames_dir.glob("*.png"))
    if not frame_files:
        raise DatasetError(f"no frame images in {frames_dir}")

    frames = [Frame(i, read_gray(p)) for i, p in enumerate(frame_files)]
    shape = frames[0].pixels.shape
    for f in frames:
        if f.pixels.shape != shape:
            raise DimensionMismatchError(
                f"{entry.id}: frame {f.index} is {f.pixels.shape}, expected {shape}"
            )

    gt = None
    gt_dir = clip_dir / "gt"
    if gt_dir.is_dir():
        gt_files = sorted(gt_dir.glob("*.png"))
        if len(gt_files) != len(frame_files):
            raise CountMismatchError(
                f"{entry.id}: {len(frame_files)} frames vs {len(gt_files)} gt masks"
            )
        gt = []
        for i, p in enumerate(gt_files):
            arr = read_gray(p)
            if arr.shape != shape:
                raise DimensionMismatchError(
                    f"{entry.id}: gt {i} is {arr.shape}, expected {shape}"
                )
            gt.append(BinaryMask(arr > gt_threshold))

    return VideoClip(
        id=entry.id, frames=frames, gt=gt, has_interference=entry.has_interference
    )


def write_clip(clip: VideoClip, root: str | Path) -> Path:
    """Write a clip in the dataset layout; returns the clip directory."""
    clip_dir = Path(root) / clip.id
    frames_dir = clip_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    for f in clip.frames:
        write_frame(f, frames_dir / f"{f.index:06d}.png")
    if clip.gt is not None:
        gt_dir = clip_dir / "gt"
        gt_dir.mkdir(parents=True, exist_ok=True)
        for i, m in enumerate(clip.gt):
            write_mask(m, gt_dir / f"{i:06d}.png")
    return clip_dir
