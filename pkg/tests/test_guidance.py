import numpy as np
import pytest

from swiseg.guidance import (
    BACKGROUND,
    TUMOR,
    Click,
    ClickSet,
    distance_transform,
    encode_clicks,
    error_masks,
    sample_click,
)
from swiseg.metrics import dice
from swiseg.volume import BinaryMask, VolumeError


def mask_of(arr):
    return BinaryMask(values=np.asarray(arr, dtype=bool))


def brute_edt(mask):
    """All-pairs distance to the nearest background voxel, with the outside
    of the grid treated as background."""
    dims = mask.shape
    zeros = []
    for x in range(-1, dims[0] + 1):
        for y in range(-1, dims[1] + 1):
            for z in range(-1, dims[2] + 1):
                inside = 0 <= x < dims[0] and 0 <= y < dims[1] and 0 <= z < dims[2]
                if not inside or not mask[x, y, z]:
                    zeros.append((x, y, z))
    zeros = np.array(zeros)
    out = np.zeros(dims)
    for x in range(dims[0]):
        for y in range(dims[1]):
            for z in range(dims[2]):
                if mask[x, y, z]:
                    d2 = ((zeros - (x, y, z)) ** 2).sum(axis=1)
                    out[x, y, z] = np.sqrt(d2.min())
    return out


class TestClickSet:
    def test_iteration_monotonicity_enforced(self):
        cs = ClickSet()
        cs.add(Click((0, 0, 0), TUMOR, 1))
        with pytest.raises(ValueError):
            cs.add(Click((1, 1, 1), TUMOR, 0))

    def test_json_round_trip(self):
        cs = ClickSet()
        cs.add(Click((1, 2, 3), TUMOR, 0))
        cs.add(Click((4, 5, 6), BACKGROUND, 2))
        data = cs.to_json()
        assert data == [
            {"pos": [1, 2, 3], "cls": "tumor", "iteration": 0},
            {"pos": [4, 5, 6], "cls": "background", "iteration": 2},
        ]
        back = ClickSet.from_json(data)
        assert back.to_json() == data

    def test_invalid_class(self):
        with pytest.raises(ValueError):
            Click((0, 0, 0), "lesion", 0)


class TestEncodeClicks:
    def test_empty_clickset_all_zero(self):
        ch = encode_clicks(ClickSet(), (5, 5, 5))
        assert not ch.tumor.values.any()
        assert not ch.background.values.any()

    def test_interior_click_sets_seven_voxels(self):
        cs = ClickSet()
        cs.add(Click((5, 5, 5), TUMOR, 0))
        ch = encode_clicks(cs, (11, 11, 11))
        assert ch.tumor.values.sum() == 7
        assert not ch.background.values.any()
        assert ch.tumor.values[5, 5, 5] == 1.0
        for d in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)):
            assert ch.tumor.values[5 + d[0], 5 + d[1], 5 + d[2]] == 1.0

    def test_corner_click_sets_four_voxels(self):
        cs = ClickSet()
        cs.add(Click((0, 0, 0), BACKGROUND, 0))
        ch = encode_clicks(cs, (6, 6, 6))
        assert ch.background.values.sum() == 4

    def test_two_distant_clicks_fourteen_voxels(self):
        cs = ClickSet()
        cs.add(Click((2, 2, 2), TUMOR, 0))
        cs.add(Click((7, 7, 7), TUMOR, 0))
        ch = encode_clicks(cs, (10, 10, 10))
        assert ch.tumor.values.sum() == 14

    def test_overlapping_clicks_saturate(self):
        cs = ClickSet()
        cs.add(Click((3, 3, 3), TUMOR, 0))
        cs.add(Click((3, 3, 4), TUMOR, 0))
        ch = encode_clicks(cs, (8, 8, 8))
        assert ch.tumor.values.max() == 1.0
        assert ch.tumor.values.sum() == 12  # 7 + 7 - 2 shared

    def test_monotone_under_added_clicks(self):
        rng = np.random.default_rng(0)
        cs = ClickSet()
        prev = encode_clicks(cs, (8, 8, 8))
        for i in range(10):
            pos = tuple(int(v) for v in rng.integers(0, 8, 3))
            cs.add(Click(pos, TUMOR if i % 2 else BACKGROUND, i))
            cur = encode_clicks(cs, (8, 8, 8))
            assert (cur.tumor.values >= prev.tumor.values).all()
            assert (cur.background.values >= prev.background.values).all()
            prev = cur

    def test_out_of_bounds_click(self):
        cs = ClickSet()
        cs.add(Click((9, 0, 0), TUMOR, 0))
        with pytest.raises(VolumeError):
            encode_clicks(cs, (5, 5, 5))


class TestErrorMasks:
    def test_perfect_prediction(self):
        m = np.zeros((4, 4, 4), dtype=bool)
        m[1:3, 1:3, 1:3] = True
        errs = error_masks(mask_of(m), mask_of(m))
        assert errs.empty

    def test_empty_prediction(self):
        l = np.zeros((4, 4, 4), dtype=bool)
        l[0, 0, 0] = True
        errs = error_masks(mask_of(np.zeros((4, 4, 4))), mask_of(l))
        assert np.array_equal(errs.under.values, l)
        assert not errs.over.values.any()

    def test_hand_placed_fn_fp(self):
        pred = np.zeros((4, 4, 4), dtype=bool)
        label = np.zeros((4, 4, 4), dtype=bool)
        label[0, 0, 0] = label[1, 1, 1] = label[2, 2, 2] = label[3, 3, 3] = True
        pred[3, 3, 3] = pred[0, 1, 0] = pred[2, 0, 1] = True
        errs = error_masks(mask_of(pred), mask_of(label))
        want_under = label & ~pred
        want_over = pred & ~label
        assert np.array_equal(errs.under.values, want_under)
        assert np.array_equal(errs.over.values, want_over)
        assert want_under.sum() == 3 and want_over.sum() == 2

    def test_partition_of_symmetric_difference(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            p = rng.random((5, 5, 5)) > 0.5
            l = rng.random((5, 5, 5)) > 0.5
            errs = error_masks(mask_of(p), mask_of(l))
            assert not (errs.under.values & errs.over.values).any()
            assert np.array_equal(errs.under.values | errs.over.values, p ^ l)

    def test_dice_recoverable_from_error_masks(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            p = rng.random((4, 4, 4)) > 0.5
            l = rng.random((4, 4, 4)) > 0.5
            if p.sum() + l.sum() == 0:
                continue
            errs = error_masks(mask_of(p), mask_of(l))
            recovered = 2 * (l.sum() - errs.under.values.sum()) / (p.sum() + l.sum())
            assert recovered == pytest.approx(dice(mask_of(p), mask_of(l)))


class TestSampleClick:
    def test_single_voxel_mask(self):
        m = np.zeros((4, 4, 4), dtype=bool)
        m[2, 1, 3] = True
        click = sample_click(mask_of(m), TUMOR, 5, np.random.default_rng(0))
        assert click.pos == (2, 1, 3)
        assert click.cls == TUMOR and click.iteration == 5

    def test_empty_mask_returns_none(self):
        assert sample_click(mask_of(np.zeros((3, 3, 3))), TUMOR, 0,
                            np.random.default_rng(0)) is None

    def test_distance_transform_matches_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            m = rng.random((5, 5, 5)) > 0.4
            got = distance_transform(m)
            want = brute_edt(m)
            assert np.allclose(got, want, atol=1e-9)

    def test_support_always_inside_mask(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            m = rng.random((6, 6, 6)) > 0.7
            if not m.any():
                continue
            click = sample_click(mask_of(m), TUMOR, 0, rng)
            assert m[click.pos]

    def test_deterministic_under_fixed_seed(self):
        m = np.zeros((8, 8, 8), dtype=bool)
        m[2:6, 2:6, 2:6] = True
        a = sample_click(mask_of(m), TUMOR, 0, np.random.default_rng(42))
        b = sample_click(mask_of(m), TUMOR, 0, np.random.default_rng(42))
        assert a == b

    def test_solid_cube_frequencies_match_exp_edt(self):
        # 5x5x5 all-foreground volume: EDT treats outside the grid as
        # background, so the center has the largest distance
        m = np.ones((5, 5, 5), dtype=bool)
        edt = brute_edt(m)
        w = np.exp(edt - edt.max())
        p = (w / w.sum()).flatten(order="F")

        n_draws = 100_000
        rng = np.random.default_rng(7)
        counts = np.zeros(125)
        mask = mask_of(m)
        for _ in range(n_draws):
            c = sample_click(mask, TUMOR, 0, rng)
            x, y, z = c.pos
            counts[x + 5 * (y + 5 * z)] += 1

        # unique mode at the center voxel
        center_lin = 2 + 5 * (2 + 5 * 2)
        assert counts.argmax() == center_lin
        assert p.argmax() == center_lin
        # within 3 sigma of multinomial noise (guard tiny p with 1 count)
        sigma = np.sqrt(n_draws * p * (1 - p))
        assert (np.abs(counts - n_draws * p) <= 3 * sigma + 1).all()
