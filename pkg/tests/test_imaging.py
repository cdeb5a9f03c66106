"""Downscale and SSIM kernels against independently coded oracles."""

import math

import numpy as np
import pytest

from framesift import (
    DimensionMismatchError,
    Frame,
    ScaleFactor,
    SsimParams,
    downscale,
    pair_score,
    ssim,
    ssim_result,
)

from conftest import const_frame, frame_of, random_frame


# --- oracles -----------------------------------------------------------

def oracle_box_mean(pixels: np.ndarray, inverse: int) -> np.ndarray:
    """Brute-force box mean: integer sums per (possibly truncated) box,
    rounded half away from zero with exact integer arithmetic."""
    h, w = pixels.shape
    out_h = math.ceil(h / inverse)
    out_w = math.ceil(w / inverse)
    out = np.zeros((out_h, out_w), dtype=np.uint8)
    for by in range(out_h):
        for bx in range(out_w):
            total = 0
            count = 0
            for y in range(by * inverse, min((by + 1) * inverse, h)):
                for x in range(bx * inverse, min((bx + 1) * inverse, w)):
                    total += int(pixels[y, x])
                    count += 1
            # floor(total/count + 1/2) without floating point
            out[by, bx] = (2 * total + count) // (2 * count)
    return out


def oracle_global_ssim(a: np.ndarray, b: np.ndarray, c1: float, c2: float) -> float:
    """Direct-formula SSIM with global population statistics, written
    with plain Python loops."""
    n = a.size
    xs = [float(v) for v in a.ravel()]
    ys = [float(v) for v in b.ravel()]
    mx = sum(xs) / n
    my = sum(ys) / n
    vx = sum((v - mx) ** 2 for v in xs) / n
    vy = sum((v - my) ** 2 for v in ys) / n
    cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / n
    score = ((2 * mx * my + c1) * (2 * cov + c2)) / (
        (mx * mx + my * my + c1) * (vx + vy + c2)
    )
    return min(1.0, max(-1.0, score))


def oracle_windowed_ssim(
    a: np.ndarray, b: np.ndarray, kernel: np.ndarray, c1: float, c2: float
) -> float:
    """Sliding-window SSIM map averaged over all valid positions."""
    kh, kw = kernel.shape
    h, w = a.shape
    values = []
    for y in range(h - kh + 1):
        for x in range(w - kw + 1):
            wa = a[y : y + kh, x : x + kw].astype(np.float64)
            wb = b[y : y + kh, x : x + kw].astype(np.float64)
            mx = float((kernel * wa).sum())
            my = float((kernel * wb).sum())
            exx = float((kernel * wa * wa).sum())
            eyy = float((kernel * wb * wb).sum())
            exy = float((kernel * wa * wb).sum())
            vx = exx - mx * mx
            vy = eyy - my * my
            cov = exy - mx * my
            values.append(
                ((2 * mx * my + c1) * (2 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
            )
    score = sum(values) / len(values)
    return min(1.0, max(-1.0, score))


def uniform7_kernel() -> np.ndarray:
    return np.full((7, 7), 1.0 / 49.0)


def gaussian11_kernel() -> np.ndarray:
    ax = np.arange(11, dtype=np.float64) - 5.0
    g = np.exp(-(ax**2) / (2.0 * 1.5**2))
    k = np.outer(g, g)
    return k / k.sum()


# --- ScaleFactor -------------------------------------------------------

def test_scale_factor_validation():
    assert ScaleFactor(1).inverse == 1
    assert ScaleFactor(np.int64(32)).inverse == 32
    with pytest.raises(ValueError):
        ScaleFactor(0)
    with pytest.raises(ValueError):
        ScaleFactor(-3)


# --- downscale ---------------------------------------------------------

def test_downscale_identity():
    f = frame_of([[1, 2], [3, 4]])
    assert downscale(f, 1) == f


def test_downscale_2x2_mean():
    f = frame_of([[10, 20], [30, 40]])
    out = downscale(f, 2)
    assert out.shape == (1, 1)
    assert out.pixels[0, 0] == 25


def test_downscale_rounds_half_away_from_zero():
    # mean 12.5 must become 13, not 12
    f = frame_of([[12, 13], [12, 13]])
    assert downscale(f, 2).pixels[0, 0] == 13


def test_downscale_truncated_edge_boxes():
    # 5 wide at inverse 2: boxes of width 2, 2, 1
    f = frame_of([np.arange(5), np.arange(5)])
    out = downscale(f, 2)
    assert out.shape == (1, 3)
    assert list(out.pixels[0]) == [1, 3, 4]  # means 0.5, 2.5, 4 rounded


def test_downscale_larger_than_frame():
    f = frame_of(np.arange(12).reshape(3, 4))
    out = downscale(f, 32)
    assert out.shape == (1, 1)
    assert out.pixels[0, 0] == oracle_box_mean(f.pixels, 32)[0, 0]


def test_downscale_constant_commutes():
    f = const_frame(137, (10, 13))
    assert np.all(downscale(f, 3).pixels == 137)


@pytest.mark.parametrize("shape", [(6, 6), (5, 7), (64, 64), (33, 47)])
@pytest.mark.parametrize("inverse", [2, 3, 32])
def test_downscale_matches_brute_force(rng, shape, inverse):
    f = random_frame(rng, shape)
    got = downscale(f, inverse)
    want = oracle_box_mean(f.pixels, inverse)
    assert got.shape == want.shape
    assert np.array_equal(got.pixels, want)


def test_downscale_576_to_18(rng):
    f = random_frame(rng, (576, 576))
    got = downscale(f, 32)
    assert got.shape == (18, 18)
    assert np.array_equal(got.pixels, oracle_box_mean(f.pixels, 32))


# --- ssim --------------------------------------------------------------

def test_ssim_identical_is_exactly_one(rng):
    for shape in [(1, 1), (3, 5), (18, 18)]:
        f = random_frame(rng, shape)
        assert ssim(f, f) == 1.0
    assert ssim(const_frame(0), const_frame(0)) == 1.0


def test_ssim_extreme_constants_matches_formula():
    # mu_a=0, mu_b=255, zero variance: score = C1 / (255^2 + C1)
    c1 = (0.01 * 255.0) ** 2
    expected = c1 / (255.0**2 + c1)
    got = ssim(const_frame(0), const_frame(255))
    assert got == pytest.approx(expected, abs=1e-15)
    assert got == pytest.approx(9.9985e-5, abs=1e-8)


def test_ssim_matches_naive_oracle_global(rng):
    params = SsimParams()
    for _ in range(100):
        a = random_frame(rng, (8, 8))
        b = random_frame(rng, (8, 8))
        want = oracle_global_ssim(a.pixels, b.pixels, params.c1, params.c2)
        assert ssim(a, b) == pytest.approx(want, abs=1e-9)


def test_ssim_matches_naive_oracle_uniform7(rng):
    params = SsimParams(window="uniform_7")
    for _ in range(5):
        a = random_frame(rng, (12, 16))
        b = random_frame(rng, (12, 16))
        want = oracle_windowed_ssim(a.pixels, b.pixels, uniform7_kernel(), params.c1, params.c2)
        assert ssim(a, b, params) == pytest.approx(want, abs=1e-9)


def test_ssim_matches_naive_oracle_gaussian11(rng):
    params = SsimParams(window="gaussian_11_sigma_1_5")
    a = random_frame(rng, (14, 14))
    b = random_frame(rng, (14, 14))
    want = oracle_windowed_ssim(a.pixels, b.pixels, gaussian11_kernel(), params.c1, params.c2)
    assert ssim(a, b, params) == pytest.approx(want, abs=1e-9)


def test_ssim_symmetry_exact(rng):
    for window in ("global", "uniform_7"):
        params = SsimParams(window=window)
        a = random_frame(rng, (9, 9))
        b = random_frame(rng, (9, 9))
        assert ssim(a, b, params) == ssim(b, a, params)


def test_ssim_reflexivity_within_tolerance(rng):
    for window in ("global", "uniform_7", "gaussian_11_sigma_1_5"):
        params = SsimParams(window=window)
        f = random_frame(rng, (16, 16))
        assert abs(ssim(f, f, params) - 1.0) <= 1e-12


def test_ssim_bounded(rng):
    frames = [
        const_frame(0),
        const_frame(255),
        random_frame(rng, (8, 8)),
        random_frame(rng, (8, 8)),
    ]
    for a in frames:
        for b in frames:
            assert -1.0 <= ssim(a, b) <= 1.0


def test_ssim_luminance_shift_monotone():
    # constant c vs c + delta: score strictly decreases with delta
    scores = [ssim(const_frame(100), const_frame(100 + d)) for d in range(0, 60, 5)]
    assert all(x > y for x, y in zip(scores, scores[1:]))


def test_ssim_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        ssim(const_frame(0, (4, 4)), const_frame(0, (4, 5)))
    assert issubclass(DimensionMismatchError, ValueError)


def test_ssim_window_fallback_on_small_frames(rng):
    a = random_frame(rng, (8, 8))
    b = random_frame(rng, (8, 8))
    res = ssim_result(a, b, SsimParams(window="gaussian_11_sigma_1_5"))
    assert res.fallback
    assert res.window == "gaussian_11_sigma_1_5"
    assert res.effective_window == "global"
    assert res.score == ssim(a, b, SsimParams(window="global"))


def test_ssim_no_fallback_when_window_fits(rng):
    a = random_frame(rng, (16, 16))
    b = random_frame(rng, (16, 16))
    res = ssim_result(a, b, SsimParams(window="uniform_7"))
    assert not res.fallback
    assert res.effective_window == "uniform_7"


def test_ssim_params_validation():
    with pytest.raises(ValueError):
        SsimParams(dynamic_range=0.0)
    with pytest.raises(ValueError):
        SsimParams(k1=0.0)
    with pytest.raises(ValueError):
        SsimParams(window="median_3")


# --- pair_score --------------------------------------------------------

def test_pair_score_identical_any_scale(rng):
    f = random_frame(rng, (64, 64))
    for inverse in (1, 4, 32):
        assert pair_score(f, f, inverse) == 1.0


def test_pair_score_is_composition(rng):
    a = random_frame(rng, (40, 40))
    b = random_frame(rng, (40, 40))
    params = SsimParams()
    assert pair_score(a, b, 8, params) == ssim(downscale(a, 8), downscale(b, 8), params)


def test_pair_score_dimension_mismatch(rng):
    # checked on the full-resolution inputs, before any downscale
    a = random_frame(rng, (64, 64))
    b = random_frame(rng, (64, 65))
    with pytest.raises(DimensionMismatchError):
        pair_score(a, b, 32)


def test_pair_score_noise_prefers_coarse_scale():
    # iid noise masks similarity at full resolution; averaging restores it
    gen = np.random.default_rng(5)
    base = gen.integers(60, 196, (128, 128)).astype(np.float64)
    noisy = []
    for _ in range(2):
        n = base + gen.normal(0.0, 40.0, base.shape)
        noisy.append(Frame(pixels=np.clip(np.rint(n), 0, 255).astype(np.uint8)))
    at_full = pair_score(noisy[0], noisy[1], 1)
    at_coarse = pair_score(noisy[0], noisy[1], 32)
    assert at_coarse > at_full
