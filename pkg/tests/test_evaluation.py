import pytest

from conftest import mask_from
from leakseg.core import BinaryMask
from leakseg.evaluation import (CATEGORY_OVERALL, CATEGORY_WITH,
                                CATEGORY_WITHOUT, EvalError, VideoMetrics,
                                aggregate, frame_confusion, video_scores)


def metrics_with(tp=0, fp=0, fn=0, frames=1, frame_tp=0, frame_tn=None,
                 frame_fp=0, frame_fn=0):
    m = VideoMetrics(tp=tp, fp=fp, fn=fn, frames_evaluated=frames)
    if frame_tn is None:
        frame_tn = frames - frame_tp - frame_fp - frame_fn
    m.frame_tp, m.frame_tn, m.frame_fp, m.frame_fn = (
        frame_tp, frame_tn, frame_fp, frame_fn)
    return m


class TestFrameConfusion:
    def test_exact_match(self):
        gt = mask_from([[1, 0], [0, 1]])
        tp, fp, fn, labels = frame_confusion(gt, gt)
        assert (tp, fp, fn) == (2, 0, 0)
        assert labels == (True, True)

    def test_both_empty_is_true_negative(self):
        empty = mask_from([[0, 0], [0, 0]])
        tp, fp, fn, labels = frame_confusion(empty, empty)
        assert (tp, fp, fn) == (0, 0, 0)
        assert labels == (False, False)

    def test_forced_counting(self):
        pred = mask_from([[1, 1, 1, 0]])
        gt = mask_from([[1, 1, 0, 1]])
        tp, fp, fn, labels = frame_confusion(pred, gt)
        assert (tp, fp, fn) == (2, 1, 1)
        assert labels == (True, True)

    def test_dimension_mismatch(self):
        with pytest.raises(EvalError):
            frame_confusion(mask_from([[1]]), mask_from([[1, 0]]))

    def test_matches_naive_double_loop(self, rng):
        for _ in range(30):
            pred = BinaryMask(rng.random((9, 11)) < 0.5)
            gt = BinaryMask(rng.random((9, 11)) < 0.5)
            tp = fp = fn = 0
            for y in range(9):
                for x in range(11):
                    p, g = bool(pred.bits[y, x]), bool(gt.bits[y, x])
                    tp += p and g
                    fp += p and not g
                    fn += (not p) and g
            assert frame_confusion(pred, gt)[:3] == (tp, fp, fn)


class TestVideoScores:
    def test_forced_arithmetic(self):
        m = metrics_with(tp=2, fp=1, fn=1, frames=1, frame_tp=1)
        iou, precision, recall, _ = video_scores(m)
        assert (iou, precision, recall) == (0.5, 2 / 3, 2 / 3)

    def test_all_empty_video_conventions(self):
        m = metrics_with(frames=4)
        iou, precision, recall, fla = video_scores(m)
        assert (iou, precision, recall, fla) == (1.0, 1.0, 1.0, 1.0)

    def test_fla_fraction(self):
        m = metrics_with(tp=1, frames=5, frame_tp=3, frame_tn=1, frame_fn=1)
        assert video_scores(m)[3] == pytest.approx(0.8)

    def test_no_frames_rejected(self):
        with pytest.raises(EvalError):
            video_scores(VideoMetrics())

    def test_iou_bounded_by_precision_recall(self, rng):
        for _ in range(100):
            m = metrics_with(tp=int(rng.integers(0, 50)),
                             fp=int(rng.integers(0, 50)),
                             fn=int(rng.integers(0, 50)), frames=3,
                             frame_tp=3)
            iou, precision, recall, _ = video_scores(m)
            assert iou <= min(precision, recall) + 1e-12


class TestAccumulation:
    def test_add_tracks_frame_labels(self):
        m = VideoMetrics()
        m.add(3, 1, 0, True, True)
        m.add(0, 0, 0, False, False)
        m.add(0, 2, 0, True, False)
        m.add(0, 0, 4, False, True)
        assert (m.frame_tp, m.frame_tn, m.frame_fp, m.frame_fn) == (1, 1, 1, 1)
        assert m.frames_evaluated == 4
        assert (m.tp, m.fp, m.fn) == (3, 3, 4)


class TestAggregate:
    def test_same_category_mean(self):
        a = metrics_with(tp=4, fp=6, fn=0, frames=1, frame_tp=1)   # iou 0.4
        b = metrics_with(tp=6, fp=4, fn=0, frames=1, frame_tp=1)   # iou 0.6
        reports = aggregate([(a, False), (b, False)])
        assert reports[CATEGORY_WITHOUT].mean_iou == pytest.approx(0.5)
        assert reports[CATEGORY_WITH] is None
        assert reports[CATEGORY_OVERALL].mean_iou == pytest.approx(0.5)

    def test_overall_is_mean_over_videos(self):
        a = metrics_with(tp=2, fp=8, fn=0, frames=1, frame_tp=1)   # iou 0.2
        b = metrics_with(tp=8, fp=2, fn=0, frames=1, frame_tp=1)   # iou 0.8
        reports = aggregate([(a, False), (b, True)])
        assert reports[CATEGORY_OVERALL].mean_iou == pytest.approx(0.5)
        assert reports[CATEGORY_OVERALL].videos == 2

    def test_single_video_reproduced_verbatim(self):
        m = metrics_with(tp=3, fp=1, fn=2, frames=2, frame_tp=2)
        reports = aggregate([(m, True)])
        iou, precision, recall, fla = video_scores(m)
        rep = reports[CATEGORY_WITH]
        assert (rep.mean_iou, rep.mean_precision, rep.mean_recall, rep.mean_fla) \
            == (iou, precision, recall, fla)

    def test_permutation_invariant(self, rng):
        videos = []
        for _ in range(6):
            videos.append((metrics_with(tp=int(rng.integers(1, 20)),
                                        fp=int(rng.integers(0, 20)),
                                        fn=int(rng.integers(0, 20)),
                                        frames=2, frame_tp=2),
                           bool(rng.random() < 0.5)))
        base = aggregate(videos)
        shuffled = list(videos)
        rng.shuffle(shuffled)
        other = aggregate(shuffled)
        for key in base:
            assert (base[key] is None) == (other[key] is None)
            if base[key] is not None:
                assert base[key].mean_iou == pytest.approx(other[key].mean_iou)
