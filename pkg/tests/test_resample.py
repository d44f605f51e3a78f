"""Resampler tests, anchored on a brute-force 2D windowed-sinc oracle."""

from __future__ import annotations

import math

import numpy as np
import pytest

from iisa.resample import (
    Image,
    ResampleSpec,
    downscale,
    kernel_value,
    output_dims,
)


def oracle_lanczos(x: float, a: int) -> float:
    """Direct transcendental evaluation, independent of the library kernel."""
    if x == 0.0:
        return 1.0
    if abs(x) >= a:
        return 0.0
    px = math.pi * x
    return (math.sin(px) / px) * (math.sin(px / a) / (px / a))


def oracle_bilinear(x: float) -> float:
    return max(0.0, 1.0 - abs(x))


def oracle_downscale_2d(arr: np.ndarray, scale: float, kernel, support: float) -> np.ndarray:
    """Non-separable reference: for every output pixel, evaluate the full 2D
    windowed kernel patch over edge-clamped source pixels and normalize."""
    in_h, in_w, channels = arr.shape
    out_w = max(1, int(math.floor(in_w * scale + 0.5)))
    out_h = max(1, int(math.floor(in_h * scale + 0.5)))
    ry, rx = in_h / out_h, in_w / out_w
    fy, fx = max(1.0, ry), max(1.0, rx)
    out = np.zeros((out_h, out_w, channels), dtype=np.float64)
    for oy in range(out_h):
        cy = (oy + 0.5) * ry
        ky0 = int(math.floor(cy - support * fy - 0.5))
        ky1 = int(math.ceil(cy + support * fy + 0.5))
        for ox in range(out_w):
            cx = (ox + 0.5) * rx
            kx0 = int(math.floor(cx - support * fx - 0.5))
            kx1 = int(math.ceil(cx + support * fx + 0.5))
            acc = np.zeros(channels)
            wsum = 0.0
            for ky in range(ky0, ky1 + 1):
                wy = kernel(((ky + 0.5) - cy) / fy)
                if wy == 0.0:
                    continue
                sy = min(max(ky, 0), in_h - 1)
                for kx in range(kx0, kx1 + 1):
                    wx = kernel(((kx + 0.5) - cx) / fx)
                    if wx == 0.0:
                        continue
                    sx = min(max(kx, 0), in_w - 1)
                    w = wy * wx
                    acc += w * arr[sy, sx].astype(np.float64)
                    wsum += w
            val = acc / wsum
            out[oy, ox] = np.clip(np.copysign(np.floor(np.abs(val) + 0.5), val), 0, 255)
    return out.astype(np.uint8)


class TestKernelValue:
    def test_center_is_one(self):
        assert kernel_value(0, 3) == 1.0

    def test_zero_outside_window(self):
        assert kernel_value(3, 3) == 0.0
        assert kernel_value(-3.5, 3) == 0.0
        assert kernel_value(2, 2) == 0.0

    def test_matches_direct_evaluation(self):
        rng = np.random.default_rng(17)
        for a in (2, 3, 4):
            for x in rng.uniform(-a, a, size=200):
                assert kernel_value(float(x), a) == pytest.approx(
                    oracle_lanczos(float(x), a), abs=1e-12
                )
        assert kernel_value(0.5, 3) == pytest.approx(oracle_lanczos(0.5, 3), abs=1e-12)

    def test_zeros_at_nonzero_integers(self):
        for k in (-2, -1, 1, 2):
            assert kernel_value(float(k), 3) == pytest.approx(0.0, abs=1e-15)

    def test_window_below_two_rejected(self):
        with pytest.raises(ValueError):
            kernel_value(0.5, 1)


class TestImageType:
    def test_sample_length_enforced(self):
        with pytest.raises(ValueError):
            Image("bad", 4, 4, 3, bytes(10))

    def test_zero_dimension_rejected(self):
        with pytest.raises(ValueError):
            Image("bad", 0, 4, 1, b"")

    def test_channel_count_enforced(self):
        with pytest.raises(ValueError):
            Image("bad", 2, 2, 2, bytes(8))

    def test_array_round_trip(self):
        rng = np.random.default_rng(3)
        arr = rng.integers(0, 256, size=(5, 7, 3), dtype=np.uint8)
        img = Image.from_array("x", arr)
        assert img.width == 7 and img.height == 5 and img.channels == 3
        np.testing.assert_array_equal(img.to_array(), arr)


class TestResampleSpec:
    def test_defaults(self):
        spec = ResampleSpec()
        assert spec.kernel == "lanczos" and spec.lanczos_window == 3

    def test_invalid_window(self):
        with pytest.raises(ValueError):
            ResampleSpec(lanczos_window=1)

    def test_invalid_kernel(self):
        with pytest.raises(ValueError):
            ResampleSpec(kernel="nearest")  # type: ignore[arg-type]


class TestDownscale:
    @pytest.mark.parametrize("scale", [0.05, 0.3, 0.9])
    @pytest.mark.parametrize("channels", [1, 3])
    def test_constant_image_preserved_exactly(self, scale, channels):
        arr = np.full((8, 8, channels), 137, dtype=np.uint8)
        out = downscale(Image.from_array("c", arr), scale)
        result = out.to_array()
        assert result.shape[:2] == (
            max(1, int(math.floor(8 * scale + 0.5))),
        ) * 2
        np.testing.assert_array_equal(result, np.full_like(result, 137))

    def test_identity_at_scale_one(self):
        rng = np.random.default_rng(5)
        arr = rng.integers(0, 256, size=(6, 9, 3), dtype=np.uint8)
        img = Image.from_array("i", arr)
        out = downscale(img, 1.0)
        assert out.samples == img.samples
        assert (out.width, out.height) == (img.width, img.height)

    @pytest.mark.parametrize(
        "dims,scale,expected",
        [
            ((8, 8), 0.5, (4, 4)),
            ((3, 3), 0.5, (2, 2)),  # round half up
            ((10, 4), 0.25, (3, 1)),
            ((5, 5), 0.05, (1, 1)),  # clamped to 1
            ((2048, 1536), 0.35, (717, 538)),
        ],
    )
    def test_dimension_law(self, dims, scale, expected):
        assert output_dims(*dims, scale) == expected
        arr = np.zeros((dims[1], dims[0], 1), dtype=np.uint8)
        out = downscale(Image.from_array("d", arr), scale)
        assert (out.width, out.height) == expected

    def test_gradient_matches_2d_oracle(self):
        grad = np.floor(np.arange(64).reshape(8, 8) * (255 / 63) + 0.5).astype(np.uint8)
        img = Image.from_array("g", grad[:, :, None])
        sep = downscale(img, 0.5).to_array()
        ref = oracle_downscale_2d(grad[:, :, None], 0.5, lambda x: oracle_lanczos(x, 3), 3.0)
        assert np.abs(sep.astype(int) - ref.astype(int)).max() <= 1

    @pytest.mark.parametrize("scale", [0.25, 0.5, 0.75])
    def test_random_images_match_2d_oracle(self, scale):
        rng = np.random.default_rng(11)
        for i in range(5):
            arr = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
            sep = downscale(Image.from_array(f"r{i}", arr), scale).to_array()
            ref = oracle_downscale_2d(arr, scale, lambda x: oracle_lanczos(x, 3), 3.0)
            assert np.abs(sep.astype(int) - ref.astype(int)).max() <= 1

    def test_bilinear_matches_2d_oracle(self):
        rng = np.random.default_rng(23)
        arr = rng.integers(0, 256, size=(12, 12, 3), dtype=np.uint8)
        sep = downscale(
            Image.from_array("b", arr), 0.5, ResampleSpec(kernel="bilinear")
        ).to_array()
        ref = oracle_downscale_2d(arr, 0.5, oracle_bilinear, 1.0)
        assert np.abs(sep.astype(int) - ref.astype(int)).max() <= 1

    def test_bicubic_constant_preserved(self):
        arr = np.full((9, 9, 3), 77, dtype=np.uint8)
        out = downscale(Image.from_array("bc", arr), 0.4, ResampleSpec(kernel="bicubic"))
        np.testing.assert_array_equal(out.to_array(), np.full_like(out.to_array(), 77))

    def test_deterministic_across_runs(self):
        rng = np.random.default_rng(7)
        arr = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
        img = Image.from_array("det", arr)
        first = downscale(img, 0.37)
        for _ in range(3):
            assert downscale(img, 0.37).samples == first.samples

    def test_deterministic_across_threads(self):
        from concurrent.futures import ThreadPoolExecutor

        rng = np.random.default_rng(8)
        arr = rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8)
        img = Image.from_array("thr", arr)
        reference = downscale(img, 0.45).samples
        with ThreadPoolExecutor(max_workers=4) as pool:
            results = list(pool.map(lambda _: downscale(img, 0.45).samples, range(16)))
        assert all(result == reference for result in results)

    def test_scale_out_of_range_rejected(self):
        img = Image.from_array("s", np.zeros((4, 4, 1), dtype=np.uint8))
        for bad in (0.0, -0.5, 1.5):
            with pytest.raises(ValueError):
                downscale(img, bad)

    def test_output_keeps_image_id(self):
        img = Image.from_array("keep-me", np.zeros((4, 4, 1), dtype=np.uint8))
        assert downscale(img, 0.5).image_id == "keep-me"
