import numpy as np
import pytest

from rpcaseg.errors import DimensionMismatchError, ThresholdOutOfRangeError
from rpcaseg.postprocess import (
    PostprocessConfig,
    disk,
    hard_threshold_mask,
    morphological_clean,
    postprocess,
    refine_contour,
)


def brute_closing(mask, radius):
    """Literal dilation-then-erosion with a disk, on an all-false plane."""
    h, w = mask.shape
    offsets = [
        (dy, dx)
        for dy in range(-radius, radius + 1)
        for dx in range(-radius, radius + 1)
        if dx * dx + dy * dy <= radius * radius
    ]

    def dilate(m):
        out = np.zeros_like(m)
        for r in range(h):
            for c in range(w):
                if m[r, c]:
                    for dy, dx in offsets:
                        rr, cc = r + dy, c + dx
                        if 0 <= rr < h and 0 <= cc < w:
                            out[rr, cc] = True
        return out

    def erode(m):
        out = np.zeros_like(m)
        for r in range(h):
            for c in range(w):
                ok = True
                for dy, dx in offsets:
                    rr, cc = r + dy, c + dx
                    if not (0 <= rr < h and 0 <= cc < w) or not m[rr, cc]:
                        ok = False
                        break
                out[r, c] = ok
        return out

    return erode(dilate(mask))


class TestHardThreshold:
    def test_zero_column_all_false(self):
        assert not hard_threshold_mask(np.zeros((5, 5)), 0.3).any()

    def test_single_entry(self):
        col = np.zeros((4, 4))
        col[2, 1] = 0.5
        mask = hard_threshold_mask(col, 0.15)
        assert mask.sum() == 1 and mask[2, 1]

    def test_sign_handled_by_magnitude(self):
        col = np.array([[-0.3, 0.1, 0.2]])
        assert hard_threshold_mask(col, 0.15).tolist() == [[True, False, True]]

    @pytest.mark.parametrize("t", [0.0, 1.0, -0.2, 1.5])
    def test_threshold_out_of_range(self, t):
        with pytest.raises(ThresholdOutOfRangeError):
            hard_threshold_mask(np.zeros((3, 3)), t)

    def test_monotone_in_threshold(self, rng):
        col = rng.standard_normal((10, 10)) * 0.4
        m_lo = hard_threshold_mask(col, 0.1)
        m_hi = hard_threshold_mask(col, 0.3)
        assert not (m_hi & ~m_lo).any()


class TestMorphologicalClean:
    def test_isolated_pixel_removed_by_opening(self):
        mask = np.zeros((30, 30), dtype=bool)
        mask[15, 15] = True
        assert not morphological_clean(mask, PostprocessConfig()).any()

    def test_large_block_preserved(self):
        mask = np.zeros((100, 100), dtype=bool)
        mask[25:75, 25:75] = True
        out = morphological_clean(mask, PostprocessConfig(min_component_area=0))
        # nothing appears outside the block; only disk-opening corner
        # rounding may trim it
        assert not (out & ~mask).any()
        assert (mask & ~out).sum() <= 4 * PostprocessConfig().opening_radius ** 2
        from scipy import ndimage

        _, n = ndimage.label(out)
        assert n == 1

    def test_hole_filled_by_closing(self):
        mask = np.zeros((40, 40), dtype=bool)
        mask[10:30, 10:30] = True
        mask[18:21, 18:21] = False
        cfg = PostprocessConfig(opening_radius=0, closing_radius=4,
                                min_component_area=0)
        out = morphological_clean(mask, cfg)
        assert np.array_equal(out, brute_closing(mask, 4))
        assert out[18:21, 18:21].all()

    def test_small_components_removed(self):
        mask = np.zeros((40, 40), dtype=bool)
        mask[5:25, 5:25] = True  # 400 px, stays
        mask[32:35, 32:35] = True  # 9 px blob, swept by area filter
        cfg = PostprocessConfig(opening_radius=0, closing_radius=0,
                                min_component_area=50)
        out = morphological_clean(mask, cfg)
        assert out[5:25, 5:25].all()
        assert not out[30:, 30:].any()

    def test_never_creates_pixels_beyond_closing_dilation(self, rng):
        from scipy import ndimage

        cfg = PostprocessConfig(min_component_area=0)
        for _ in range(20):
            mask = rng.random((24, 24)) < 0.3
            out = morphological_clean(mask, cfg)
            allowed = ndimage.binary_dilation(mask, disk(cfg.closing_radius))
            assert not (out & ~allowed).any()

    def test_idempotent_with_zero_min_area(self, rng):
        cfg = PostprocessConfig(min_component_area=0)
        for _ in range(20):
            mask = rng.random((30, 40)) < 0.35
            once = morphological_clean(mask, cfg)
            assert np.array_equal(morphological_clean(once, cfg), once)

    def test_radius_zero_is_identity(self, rng):
        mask = rng.random((12, 12)) < 0.5
        cfg = PostprocessConfig(opening_radius=0, closing_radius=0,
                                min_component_area=0)
        assert np.array_equal(morphological_clean(mask, cfg), mask)


class TestRefineContour:
    def test_zero_iterations_identity(self, rng):
        mask = rng.random((20, 20)) < 0.4
        guide = rng.random((20, 20))
        cfg = PostprocessConfig(contour_iterations=0)
        assert np.array_equal(refine_contour(mask, guide, cfg), mask)

    def test_all_false_stays_all_false(self, rng):
        guide = rng.random((25, 25))
        out = refine_contour(np.zeros((25, 25), bool), guide, PostprocessConfig())
        assert not out.any()

    def test_disk_grows_to_edge_and_stops(self):
        yy, xx = np.mgrid[:64, :64]
        rad = np.sqrt((yy - 32.0) ** 2 + (xx - 32.0) ** 2)
        guide = np.where(rad <= 14, 0.9, 0.1)
        mask = rad <= 10
        prev_area = mask.sum()
        for iters in (10, 25, 50):
            out = refine_contour(mask, guide, PostprocessConfig(contour_iterations=iters))
            area = out.sum()
            assert area >= prev_area
            prev_area = area
        final = refine_contour(mask, guide, PostprocessConfig())
        assert final.sum() > mask.sum()
        assert not (final & (rad > 16)).any()

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            refine_contour(np.zeros((4, 4), bool), np.zeros((4, 5)), PostprocessConfig())

    def test_deterministic(self, rng):
        mask = rng.random((30, 30)) < 0.3
        guide = rng.random((30, 30))
        cfg = PostprocessConfig(contour_iterations=7)
        assert np.array_equal(
            refine_contour(mask, guide, cfg), refine_contour(mask, guide, cfg)
        )


class TestPostprocessChain:
    def test_zero_sparse_gives_all_false(self, rng):
        guides = [rng.random((8, 10)) for _ in range(3)]
        masks = postprocess(np.zeros((80, 3)), guides, PostprocessConfig())
        assert len(masks) == 3
        assert not any(m.any() for m in masks)

    def test_single_blob_survives_as_one_component(self, rng):
        from scipy import ndimage

        h, w = 40, 50
        col = np.zeros((h, w))
        col[12:26, 18:34] = 0.6  # coherent blob well above threshold
        guide = np.full((h, w), 0.2)
        guide[12:26, 18:34] = 0.9
        cfg = PostprocessConfig(contour_iterations=10)
        masks = postprocess(col.reshape(-1, 1), [guide], cfg)
        labels, n = ndimage.label(masks[0])
        assert n == 1
        assert masks[0].sum() >= 100

    def test_contour_zero_equals_threshold_plus_clean(self, rng):
        sparse = rng.standard_normal((60, 2)) * 0.3
        guides = [rng.random((6, 10)) for _ in range(2)]
        cfg = PostprocessConfig(contour_iterations=0)
        chained = postprocess(sparse, guides, cfg)
        for j in range(2):
            direct = morphological_clean(
                hard_threshold_mask(sparse[:, j].reshape(6, 10), cfg.hard_threshold),
                cfg,
            )
            assert np.array_equal(chained[j], direct)

    def test_column_guide_count_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            postprocess(np.zeros((12, 3)), [np.zeros((3, 4))] * 2, PostprocessConfig())

    def test_column_reshape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            postprocess(np.zeros((11, 2)), [np.zeros((3, 4))] * 2, PostprocessConfig())


class TestPostprocessConfig:
    def test_bad_threshold(self):
        with pytest.raises(ThresholdOutOfRangeError):
            PostprocessConfig(hard_threshold=1.2)

    def test_bad_radius(self):
        with pytest.raises(ValueError):
            PostprocessConfig(opening_radius=-1)

    def test_bad_iterations(self):
        with pytest.raises(ValueError):
            PostprocessConfig(contour_iterations=-3)
