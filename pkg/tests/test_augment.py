import math

import numpy as np
import pytest

from mricnn import augment as aug
from mricnn.dataset import ImageSample
from mricnn.errors import ConfigurationError, ParameterError

from oracles import gaussian_weight_2d


def disk(h, w, r):
    yy, xx = np.mgrid[0:h, 0:w]
    return np.where((yy - (h - 1) / 2) ** 2 + (xx - (w - 1) / 2) ** 2 <= r * r, 200.0, 30.0)


class TestRotate:
    def test_zero_angle_identity(self, rng):
        img = rng.uniform(0, 255, size=(9, 12))
        for d in ("cw", "ccw"):
            np.testing.assert_array_equal(aug.rotate(img, d, 0.0), img)

    @pytest.mark.parametrize("shape", [(8, 10), (9, 11), (176, 208)])
    @pytest.mark.parametrize("direction", ["cw", "ccw"])
    def test_half_turn_is_double_flip(self, shape, direction, rng):
        img = rng.uniform(0, 255, size=shape)
        expected = aug.flip(aug.flip(img, "horizontal"), "vertical")
        assert np.abs(aug.rotate(img, direction, 180.0) - expected).max() <= 1 / 255

    def test_ccw_quarter_turn_moves_right_to_top(self):
        img = np.zeros((7, 7))
        img[3, 5] = 255.0  # right of centre
        out = aug.rotate(img, "ccw", 90.0)
        assert out[1, 3] == pytest.approx(255.0)
        out = aug.rotate(img, "cw", 90.0)
        assert out[5, 3] == pytest.approx(255.0)

    def test_round_trip_recovers_centre(self):
        img = disk(41, 41, 12)
        back = aug.rotate(aug.rotate(img, "cw", 37.0), "ccw", 37.0)
        assert abs(back[20, 20] - img[20, 20]) <= 2 / 255

    def test_corners_filled_black(self):
        out = aug.rotate(np.full((20, 20), 100.0), "ccw", 45.0)
        assert out[0, 0] == 0.0 and out[10, 10] == pytest.approx(100.0)

    def test_random_angle_drawn_from_rng(self):
        img = disk(15, 15, 4) + np.arange(15)[None, :]
        a = aug.rotate(img, "ccw", rng=np.random.default_rng(3))
        b = aug.rotate(img, "ccw", rng=np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("angle", [-1.0, 180.5])
    def test_angle_out_of_range(self, angle):
        with pytest.raises(ParameterError):
            aug.rotate(np.zeros((3, 3)), "cw", angle)

    def test_bad_direction(self):
        with pytest.raises(ParameterError):
            aug.rotate(np.zeros((3, 3)), "up", 10.0)


class TestFlip:
    def test_definition(self):
        img = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert aug.flip(img, "horizontal").tolist() == [[2, 1], [4, 3]]
        assert aug.flip(img, "vertical").tolist() == [[3, 4], [1, 2]]

    def test_involution_and_commute(self, rng):
        img = rng.uniform(0, 255, size=(5, 8))
        for axis in ("horizontal", "vertical"):
            np.testing.assert_array_equal(aug.flip(aug.flip(img, axis), axis), img)
        hv = aug.flip(aug.flip(img, "horizontal"), "vertical")
        vh = aug.flip(aug.flip(img, "vertical"), "horizontal")
        np.testing.assert_array_equal(hv, vh)

    def test_bad_axis(self):
        with pytest.raises(ParameterError):
            aug.flip(np.zeros((2, 2)), "diagonal")


class TestBlur:
    def test_constant_preserved_exactly(self):
        img = np.full((10, 13), 117.3)
        np.testing.assert_array_equal(aug.gaussian_blur(img, 1.7), img)

    def test_interior_impulse_keeps_mass(self):
        img = np.zeros((21, 21))
        img[10, 10] = 255.0
        assert aug.gaussian_blur(img, 1.0).sum() == pytest.approx(255.0, abs=1e-3)

    def test_impulse_centre_matches_direct_2d_kernel(self):
        img = np.zeros((15, 15))
        img[7, 7] = 1.0
        out = aug.gaussian_blur(img, 1.0)
        oracle = gaussian_weight_2d(1.0, 3)
        assert out[7, 7] == pytest.approx(oracle[3, 3], abs=1e-12)
        np.testing.assert_allclose(out[4:11, 4:11], oracle, atol=1e-12)

    def test_kernel_radius(self):
        assert len(aug.gaussian_kernel(1.0)) == 7
        assert len(aug.gaussian_kernel(0.4)) == 5
        assert aug.gaussian_kernel(2.5).sum() == pytest.approx(1.0)

    def test_small_image_reflects(self):
        out = aug.gaussian_blur(np.arange(6.0).reshape(2, 3) * 40, 2.0)
        assert out.shape == (2, 3) and np.all((out >= 0) & (out <= 255))

    @pytest.mark.parametrize("sigma", [0.0, -1.0])
    def test_sigma_must_be_positive(self, sigma):
        with pytest.raises(ParameterError):
            aug.gaussian_blur(np.zeros((3, 3)), sigma)


class TestNoise:
    def test_zero_amplitude(self, rng):
        img = rng.uniform(0, 255, size=(4, 4))
        np.testing.assert_array_equal(aug.add_noise(img, "gaussian", 0.0, np.random.default_rng(0)), img)

    def test_same_seed_same_noise(self):
        img = np.full((6, 6), 128.0)
        a = aug.add_noise(img, "random", 0.05, np.random.default_rng(9))
        b = aug.add_noise(img, "random", 0.05, np.random.default_rng(9))
        np.testing.assert_array_equal(a, b)

    def test_gaussian_mean_near_zero(self):
        img = np.full((176, 208), 128.0)
        out = aug.add_noise(img, "gaussian", 0.05, np.random.default_rng(0))
        # std 12.75 over 36608 pixels: 4 sigma of the mean is ~0.27
        assert abs((out - img).mean()) <= 1.0
        assert (out - img).std() == pytest.approx(12.75, rel=0.05)

    def test_uniform_bounded(self):
        img = np.full((50, 50), 128.0)
        diff = aug.add_noise(img, "uniform", 0.1, np.random.default_rng(0)) - img
        assert np.abs(diff).max() <= 25.5

    def test_clamped(self):
        out = aug.add_noise(np.full((30, 30), 250.0), "gaussian", 0.5, np.random.default_rng(1))
        assert out.max() <= 255.0 and out.min() >= 0.0

    def test_bad_arguments(self):
        with pytest.raises(ParameterError):
            aug.add_noise(np.zeros((2, 2)), "gaussian", -0.1, np.random.default_rng(0))
        with pytest.raises(ParameterError):
            aug.add_noise(np.zeros((2, 2)), "pink", 0.1, np.random.default_rng(0))


def samples(n, shape=(12, 14), seed=0):
    g = np.random.default_rng(seed)
    return [ImageSample(g.uniform(0, 255, size=shape), i % 4, "original", f"img{i}") for i in range(n)]


class TestAugmentDataset:
    def test_multiplier(self):
        out = aug.augment_dataset(samples(10), aug.AugmentPlan(seed=1))
        assert len(out) == 70

    def test_empty_plan_is_identity(self):
        src = samples(5)
        out = aug.augment_dataset(src, aug.AugmentPlan(transforms=()))
        assert out == src

    def test_labels_and_provenance(self):
        src = samples(4)
        out = aug.augment_dataset(src, aug.AugmentPlan(seed=2))
        for i, s in enumerate(src):
            group = out[i * 7 : (i + 1) * 7]
            assert all(o.label == s.label for o in group)
            assert [o.provenance for o in group] == ["original", *aug.TRANSFORMS]
            assert all(o.pixels.shape == s.pixels.shape for o in group)
            assert all(o.pixels.min() >= 0 and o.pixels.max() <= 255 for o in group)

    def test_bitwise_deterministic(self):
        a = aug.augment_dataset(samples(6), aug.AugmentPlan(seed=5))
        b = aug.augment_dataset(samples(6), aug.AugmentPlan(seed=5))
        assert all(x.pixels.tobytes() == y.pixels.tobytes() for x, y in zip(a, b))
        c = aug.augment_dataset(samples(6), aug.AugmentPlan(seed=6))
        assert any(x.pixels.tobytes() != y.pixels.tobytes() for x, y in zip(a, c))

    def test_per_image_streams_independent_of_neighbours(self):
        plan = aug.AugmentPlan(transforms=("noise",), seed=3)
        img = samples(1)[0].pixels
        alone = aug.apply_transform(img, "noise", plan, 4)
        in_batch = aug.augment_dataset(samples(5) + [ImageSample(img, 0)], plan)
        # image index 5 in the batch uses stream index 5, index 4 uses stream 4
        np.testing.assert_array_equal(aug.apply_transform(img, "noise", plan, 5), in_batch[-1].pixels)
        assert not np.array_equal(alone, in_batch[-1].pixels)

    def test_bad_sample_recorded_not_raised(self):
        src = samples(2) + [ImageSample(np.zeros((0, 3)), 1, "original", "broken")]
        skipped = []
        out = aug.augment_dataset(src, aug.AugmentPlan(seed=0), skipped)
        assert len(out) == 14 and skipped[0][0] == "broken"

    def test_empty_dataset(self):
        with pytest.raises(ConfigurationError):
            aug.augment_dataset([], aug.AugmentPlan())

    def test_plan_validation(self):
        with pytest.raises(ConfigurationError, match="swirl"):
            aug.AugmentPlan.parse("hflip,swirl")
        with pytest.raises(ConfigurationError, match="more than once"):
            aug.AugmentPlan(transforms=("hflip", "hflip"))
        assert aug.AugmentPlan.parse("all").transforms == aug.TRANSFORMS
        assert aug.AugmentPlan.parse("none").transforms == ()
        assert aug.AugmentPlan.parse(" vflip , blur ").transforms == ("vflip", "blur")
