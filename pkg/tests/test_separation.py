import numpy as np
import pytest

import helpers
from dynslam import separation as sp
from dynslam.separation import Detection


class TestDetection:
    def test_rejects_degenerate(self):
        with pytest.raises(ValueError):
            Detection(5, 5, 5, 10)

    def test_size(self):
        d = Detection(2, 3, 10, 9)
        assert d.width == 8 and d.height == 6


class TestFilterDetections:
    def test_confidence_threshold_is_strict(self):
        dets = [Detection(0, 0, 4, 4, confidence=0.5),
                Detection(0, 0, 4, 4, confidence=0.51)]
        kept = sp.filter_detections(dets, 10, 10)
        assert len(kept) == 1 and kept[0].confidence == 0.51

    def test_clips_to_image(self):
        kept = sp.filter_detections([Detection(-3, -2, 6, 20, confidence=0.9)],
                                    10, 10)
        assert kept == [Detection(0, 0, 6, 10, confidence=0.9)]

    def test_drops_fully_outside(self):
        assert sp.filter_detections([Detection(12, 0, 20, 4, confidence=0.9)],
                                    10, 10) == []


class TestHistogram:
    def test_single_bin(self):
        iv = sp.compute_histogram([2.45, 2.5, 2.55])
        assert (iv.lo, iv.hi) == pytest.approx((2.4, 2.6))

    def test_run_expands_over_half_mode(self):
        # bins [2.0,2.2): 4 hits, [2.2,2.4): 2 hits (exactly half, included),
        # [2.4,2.6): 1 hit (below half, excluded)
        vals = [2.1] * 4 + [2.3] * 2 + [2.5]
        iv = sp.compute_histogram(vals)
        assert (iv.lo, iv.hi) == pytest.approx((2.0, 2.4))

    def test_ignores_invalid_zeros(self):
        iv = sp.compute_histogram([0.0, 0.0, 1.1])
        assert (iv.lo, iv.hi) == pytest.approx((1.0, 1.2))

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            sp.compute_histogram([0.0, 0.0])

    def test_matches_oracle(self, rng):
        for _ in range(50):
            vals = rng.uniform(0.3, 5.0, rng.integers(1, 200))
            iv = sp.compute_histogram(vals)
            assert (iv.lo, iv.hi) == helpers.oracle_histogram_interval(
                vals.tolist(), 0.2)


class TestMagnify:
    def test_contains_original(self, rng):
        for _ in range(50):
            x0, y0 = int(rng.integers(0, 20)), int(rng.integers(0, 20))
            box = Detection(x0, y0, x0 + int(rng.integers(1, 15)),
                            y0 + int(rng.integers(1, 15)))
            m = sp.magnify_range(box, 1.2, 40, 40)
            assert m.x_ul <= box.x_ul and m.y_ul <= box.y_ul
            assert m.x_lr >= box.x_lr and m.y_lr >= box.y_lr

    def test_identity_factor(self):
        box = Detection(4, 6, 10, 12)
        assert sp.magnify_range(box, 1.0, 40, 40) == box

    def test_clips_at_border(self):
        m = sp.magnify_range(Detection(0, 0, 10, 10), 1.5, 12, 12)
        assert (m.x_ul, m.y_ul, m.x_lr, m.y_lr) == (0, 0, 12, 12)

    def test_rejects_shrinking(self):
        with pytest.raises(ValueError):
            sp.magnify_range(Detection(0, 0, 4, 4), 0.9, 10, 10)


class TestSceneSeparation:
    def test_partition_is_exact(self, rng):
        depth, dets = helpers.random_filter_frame(rng)
        res = sp.scene_separation(depth, dets)
        total = res.background.copy()
        for _, part in res.parts:
            assert not ((total > 0) & (part > 0)).any()
            total = total + part
        np.testing.assert_array_equal(total, depth)

    def test_overlap_goes_to_higher_confidence(self):
        depth = np.full((10, 10), 2.0)
        dets = [Detection(0, 0, 6, 6, confidence=0.6),
                Detection(4, 4, 10, 10, confidence=0.9)]
        res = sp.scene_separation(depth, dets)
        assert res.parts[1][1][5, 5] == 2.0
        assert res.parts[0][1][5, 5] == 0.0

    def test_background_interval_uses_whole_frame(self):
        depth = np.full((8, 8), 3.0)
        depth[2:5, 2:5] = 1.5  # inside the only box
        res = sp.scene_separation(depth, [Detection(2, 2, 5, 5)])
        # 55 pixels at 3.0 dominate; the 9 human pixels stay below half mode
        bgi = res.background_interval
        assert (bgi.lo, bgi.hi) == pytest.approx((3.0, 3.2))
        hi = res.part_intervals[0]
        assert (hi.lo, hi.hi) == pytest.approx((1.4, 1.6))

    def test_empty_part_interval_is_none(self):
        depth = np.zeros((8, 8))
        depth[6, 6] = 2.0
        res = sp.scene_separation(depth, [Detection(0, 0, 3, 3)])
        assert res.part_intervals[0] is None


class TestFilterOutliers:
    def test_background_outlier_removed(self):
        depth = np.full((12, 12), 3.0)
        depth[4:8, 4:8] = 1.5
        depth[3, 3] = 0.9  # outlier just outside the box, inside magnified box
        res = sp.separate_and_filter(depth, [Detection(4, 4, 8, 8)])
        assert res.background[3, 3] == 0.0

    def test_human_outlier_moved_to_background(self):
        depth = np.full((12, 12), 3.0)
        depth[4:8, 4:8] = 1.5
        depth[5, 5] = 3.0  # background leaking through the box
        res = sp.separate_and_filter(depth, [Detection(4, 4, 8, 8)])
        assert res.parts[0][1][5, 5] == 0.0
        assert res.background[5, 5] == 3.0

    def test_pixels_outside_magnified_box_untouched(self):
        depth = np.full((20, 20), 3.0)
        depth[8:12, 8:12] = 1.5
        depth[0, 0] = 0.2  # far from the box
        res = sp.separate_and_filter(depth, [Detection(8, 8, 12, 12)])
        assert res.background[0, 0] == 0.2

    def test_matches_oracle_randomized(self, rng):
        for _ in range(25):
            depth, dets = helpers.random_filter_frame(rng)
            res = sp.separate_and_filter(depth, dets)
            obg, oparts = helpers.oracle_separate_and_filter(depth, dets)
            np.testing.assert_array_equal(res.background, obg)
            for (_, part), opart in zip(res.parts, oparts):
                np.testing.assert_array_equal(part, opart)
