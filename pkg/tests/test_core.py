import numpy as np
import pytest

from leakseg.core import (BBox, BinaryMask, CountMismatchError,
                          DimensionMismatchError, Frame, ManifestEntry,
                          ManifestError, MissingDirectoryError, ScoredBox,
                          VideoClip, load_clip, manifest_text, parse_manifest,
                          read_mask, write_clip, write_gray, write_mask)

MANIFEST_TEXT = """id,path,has_interference,excluded
v01,v01,false,false
v24,v24,false,true
v26,v26,true,true
"""


def make_clip(tmp_path, n_frames=5, n_gt=None, shape=(8, 10), gt_shape=None):
    clip_dir = tmp_path / "vid"
    (clip_dir / "frames").mkdir(parents=True)
    rng = np.random.default_rng(1)
    for i in range(n_frames):
        write_gray(rng.integers(0, 256, shape).astype(np.uint8),
                   clip_dir / "frames" / f"{i:06d}.png")
    if n_gt is not None:
        (clip_dir / "gt").mkdir()
        for i in range(n_gt):
            arr = (rng.random(gt_shape or shape) * 255).astype(np.uint8)
            write_gray(arr, clip_dir / "gt" / f"{i:06d}.png")
    return tmp_path, ManifestEntry("vid", "vid", False)


class TestTypes:
    def test_frame_requires_uint8_2d(self):
        with pytest.raises(ValueError):
            Frame(0, np.zeros((4, 4), dtype=np.float32))
        with pytest.raises(ValueError):
            Frame(0, np.zeros((4,), dtype=np.uint8))

    def test_bbox_rejects_degenerate(self):
        with pytest.raises(ValueError):
            BBox(5, 0, 5, 10)
        with pytest.raises(ValueError):
            BBox(0, 9, 10, 3)

    def test_bbox_clipping(self):
        assert BBox(-5, -5, 4, 4).clipped(10, 10) == BBox(0, 0, 4, 4)
        assert BBox(20, 20, 30, 30).clipped(10, 10) is None

    def test_scored_box_ranges(self):
        box = BBox(0, 0, 1, 1)
        with pytest.raises(ValueError):
            ScoredBox(box, 1.5, 0)
        with pytest.raises(ValueError):
            ScoredBox(box, 0.5, 2)

    def test_clip_gt_pairing(self):
        frames = [Frame(i, np.zeros((4, 4), dtype=np.uint8)) for i in range(3)]
        gt = [BinaryMask(np.zeros((4, 4), dtype=bool)) for _ in range(2)]
        with pytest.raises(CountMismatchError):
            VideoClip("x", frames, gt=gt)


class TestManifest:
    def test_parse_rows_and_exclusions(self):
        manifest = parse_manifest(MANIFEST_TEXT)
        assert [e.id for e in manifest.entries] == ["v01", "v24", "v26"]
        v26 = manifest.entries[2]
        assert v26.excluded and v26.has_interference
        assert [e.id for e in manifest.active_entries()] == ["v01"]

    def test_empty_text_is_empty_manifest(self):
        assert parse_manifest("") .entries == []

    def test_duplicate_id_rejected(self):
        text = MANIFEST_TEXT + "v01,elsewhere,false,false\n"
        with pytest.raises(ManifestError):
            parse_manifest(text)

    def test_malformed_row_rejected(self):
        with pytest.raises(ManifestError):
            parse_manifest("id,path,has_interference,excluded\nv01,v01,false\n")
        with pytest.raises(ManifestError):
            parse_manifest("id,path,has_interference,excluded\nv01,v01,yes,false\n")

    def test_round_trip_through_text(self):
        manifest = parse_manifest(MANIFEST_TEXT)
        assert parse_manifest(manifest_text(manifest)).entries == manifest.entries


class TestMaskIO:
    def test_round_trip_simple(self, tmp_path):
        checker = BinaryMask((np.indices((6, 7)).sum(axis=0) % 2).astype(bool))
        path = tmp_path / "m.png"
        write_mask(checker, path)
        assert read_mask(path) == checker

    def test_round_trip_random_masks(self, tmp_path, rng):
        for i in range(50):
            mask = BinaryMask(rng.random((13, 17)) < rng.random())
            path = tmp_path / f"{i}.png"
            write_mask(mask, path)
            assert read_mask(path) == mask

    def test_unwritable_path(self):
        from leakseg.core import DatasetError
        mask = BinaryMask(np.zeros((2, 2), dtype=bool))
        with pytest.raises(DatasetError):
            write_mask(mask, "/nonexistent-dir/nope/m.png")


class TestLoadClip:
    def test_paired_load(self, tmp_path):
        root, entry = make_clip(tmp_path, n_frames=5, n_gt=5)
        clip = load_clip(root, entry)
        assert len(clip.frames) == 5
        assert clip.gt is not None and len(clip.gt) == 5
        assert [f.index for f in clip.frames] == list(range(5))

    def test_gt_absent(self, tmp_path):
        root, entry = make_clip(tmp_path, n_frames=4)
        clip = load_clip(root, entry)
        assert clip.gt is None

    def test_count_mismatch(self, tmp_path):
        root, entry = make_clip(tmp_path, n_frames=5, n_gt=4)
        with pytest.raises(CountMismatchError):
            load_clip(root, entry)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(MissingDirectoryError):
            load_clip(tmp_path, ManifestEntry("nope", "nope", False))

    def test_gt_dimension_mismatch(self, tmp_path):
        root, entry = make_clip(tmp_path, n_frames=3, n_gt=3, gt_shape=(9, 10))
        with pytest.raises(DimensionMismatchError):
            load_clip(root, entry)

    def test_deterministic(self, tmp_path):
        root, entry = make_clip(tmp_path, n_frames=4, n_gt=4)
        a = load_clip(root, entry)
        b = load_clip(root, entry)
        for fa, fb in zip(a.frames, b.frames):
            assert np.array_equal(fa.pixels, fb.pixels)
        for ga, gb in zip(a.gt, b.gt):
            assert ga == gb

    def test_gt_binarization_threshold(self, tmp_path):
        clip_dir = tmp_path / "v"
        (clip_dir / "frames").mkdir(parents=True)
        (clip_dir / "gt").mkdir()
        write_gray(np.zeros((2, 2), dtype=np.uint8), clip_dir / "frames" / "000000.png")
        write_gray(np.array([[0, 127], [128, 255]], dtype=np.uint8),
                   clip_dir / "gt" / "000000.png")
        clip = load_clip(tmp_path, ManifestEntry("v", "v", False))
        assert clip.gt[0] == BinaryMask(np.array([[False, False], [True, True]]))

    def test_write_clip_round_trip(self, tmp_path, rng):
        frames = [Frame(i, rng.integers(0, 256, (6, 5)).astype(np.uint8))
                  for i in range(3)]
        gt = [BinaryMask(rng.random((6, 5)) < 0.5) for _ in range(3)]
        clip = VideoClip("rt", frames, gt=gt, has_interference=True)
        write_clip(clip, tmp_path)
        loaded = load_clip(tmp_path, ManifestEntry("rt", "rt", True))
        for fa, fb in zip(clip.frames, loaded.frames):
            assert np.array_equal(fa.pixels, fb.pixels)
        for ga, gb in zip(clip.gt, loaded.gt):
            assert ga == gb
