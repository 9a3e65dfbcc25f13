import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from wavegan.errors import ConfigurationError, ShapeError
from wavegan.wavelet import (
    BAND_NAMES,
    FrequencyBands,
    band_energy,
    haar_decompose,
    haar_kernels,
    haar_reconstruct,
    partial_reconstruct,
)


def brute_force_decompose(x: np.ndarray) -> dict:
    """Independent oracle: explicit dot products of every 2x2 block with
    the four separable Haar kernels."""
    lo = np.array([1.0, 1.0]) / np.sqrt(2)
    hi = np.array([-1.0, 1.0]) / np.sqrt(2)
    kernels = {
        "ll": np.outer(lo, lo),
        "lh": np.outer(hi, lo),
        "hl": np.outer(lo, hi),
        "hh": np.outer(hi, hi),
    }
    b, c, h, w = x.shape
    out = {k: np.zeros((b, c, h // 2, w // 2)) for k in kernels}
    for name, ker in kernels.items():
        for bi in range(b):
            for ci in range(c):
                for i in range(h // 2):
                    for j in range(w // 2):
                        block = x[bi, ci, 2 * i : 2 * i + 2, 2 * j : 2 * j + 2]
                        out[name][bi, ci, i, j] = (block * ker).sum()
    return out


def rand_map(shape, seed=0):
    return torch.from_numpy(np.random.default_rng(seed).normal(size=shape)).float()


class TestKernels:
    def test_unit_norm_and_orthogonal(self):
        k = haar_kernels(torch.float64).reshape(4, 4)
        gram = k @ k.t()
        assert torch.allclose(gram, torch.eye(4, dtype=torch.float64), atol=1e-12)


class TestDecompose:
    def test_single_block(self):
        x = torch.tensor([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
        bands = haar_decompose(x)
        assert bands.ll.item() == pytest.approx(5.0)
        assert bands.lh.item() == pytest.approx(2.0)
        assert bands.hl.item() == pytest.approx(1.0)
        assert bands.hh.item() == pytest.approx(0.0)

    def test_constant_image(self):
        c = 3.7
        x = torch.full((2, 3, 8, 8), c)
        bands = haar_decompose(x)
        assert torch.allclose(bands.ll, torch.full_like(bands.ll, 2 * c), atol=1e-6)
        for b in (bands.lh, bands.hl, bands.hh):
            assert torch.allclose(b, torch.zeros_like(b), atol=1e-6)

    def test_energy_of_example_block(self):
        x = torch.tensor([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
        bands = haar_decompose(x)
        assert float((x * x).sum()) == pytest.approx(30.0)
        assert float(band_energy(bands)) == pytest.approx(30.0, abs=1e-5)

    def test_matches_brute_force_oracle(self):
        x = rand_map((2, 3, 8, 6), seed=1)
        bands = haar_decompose(x)
        oracle = brute_force_decompose(x.numpy())
        for name, band in zip(BAND_NAMES, bands):
            np.testing.assert_allclose(band.numpy(), oracle[name], atol=1e-5)

    @pytest.mark.parametrize("shape", [(1, 1, 3, 4), (1, 1, 4, 5), (1, 1, 1, 4)])
    def test_odd_dims_rejected(self, shape):
        with pytest.raises(ShapeError):
            haar_decompose(torch.zeros(shape))

    def test_wrong_rank_rejected(self):
        with pytest.raises(ShapeError):
            haar_decompose(torch.zeros(4, 4))


class TestReconstruct:
    def test_perfect_reconstruction(self):
        x = rand_map((2, 3, 16, 16), seed=2)
        rec = haar_reconstruct(haar_decompose(x))
        assert float((rec - x).abs().max()) < 1e-5

    def test_zero_bands(self):
        z = torch.zeros(1, 1, 4, 4)
        out = haar_reconstruct(FrequencyBands(z, z, z, z))
        assert torch.equal(out, torch.zeros(1, 1, 8, 8))

    def test_inverse_of_example(self):
        one = lambda v: torch.full((1, 1, 1, 1), v)
        out = haar_reconstruct(FrequencyBands(one(5.0), one(2.0), one(1.0), one(0.0)))
        expected = torch.tensor([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
        assert torch.allclose(out, expected, atol=1e-6)

    def test_mismatched_band_shapes(self):
        z = torch.zeros(1, 1, 4, 4)
        with pytest.raises(ShapeError):
            haar_reconstruct(FrequencyBands(z, z, z, torch.zeros(1, 1, 2, 2)))


class TestPartialReconstruct:
    def test_all_bands_equals_full(self):
        bands = haar_decompose(rand_map((1, 2, 8, 8), seed=3))
        full = haar_reconstruct(bands)
        part = partial_reconstruct(bands, BAND_NAMES)
        assert torch.allclose(full, part)

    def test_ll_only_on_constant(self):
        x = torch.full((1, 1, 8, 8), 0.5)
        out = partial_reconstruct(haar_decompose(x), ["ll"])
        assert torch.allclose(out, x, atol=1e-6)

    def test_detail_complement(self):
        x = rand_map((1, 2, 8, 8), seed=4)
        bands = haar_decompose(x)
        detail = partial_reconstruct(bands, ["lh", "hl", "hh"])
        coarse = partial_reconstruct(bands, ["ll"])
        assert torch.allclose(detail, x - coarse, atol=1e-5)

    def test_empty_mask_rejected(self):
        bands = haar_decompose(torch.zeros(1, 1, 4, 4))
        with pytest.raises(ConfigurationError):
            partial_reconstruct(bands, [])

    def test_unknown_band_rejected(self):
        bands = haar_decompose(torch.zeros(1, 1, 4, 4))
        with pytest.raises(ConfigurationError):
            partial_reconstruct(bands, ["xx"])


@st.composite
def even_maps(draw):
    h = draw(st.integers(1, 8)) * 2
    w = draw(st.integers(1, 8)) * 2
    seed = draw(st.integers(0, 2 ** 31))
    return rand_map((1, 2, h, w), seed=seed)


class TestProperties:
    @given(even_maps())
    @settings(max_examples=50, deadline=None)
    def test_round_trip_and_energy(self, x):
        bands = haar_decompose(x)
        assert float((haar_reconstruct(bands) - x).abs().max()) < 1e-5
        ex = float((x * x).sum())
        eb = float(band_energy(bands))
        assert abs(ex - eb) <= 1e-5 * max(ex, 1e-12)

    @given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2 ** 31))
    @settings(max_examples=30, deadline=None)
    def test_linearity(self, a, b, seed):
        x = rand_map((1, 1, 6, 6), seed=seed)
        y = rand_map((1, 1, 6, 6), seed=seed + 1)
        left = haar_decompose(a * x + b * y)
        for lb, xb, yb in zip(left, haar_decompose(x), haar_decompose(y)):
            assert torch.allclose(lb, a * xb + b * yb, atol=1e-4)


class TestGradients:
    def test_decompose_gradient_matches_finite_differences(self):
        x = rand_map((1, 1, 8, 8), seed=5).double().requires_grad_(True)
        weights = [torch.randn(1, 1, 4, 4, dtype=torch.float64) for _ in range(4)]

        def scalar_fn(inp):
            bands = haar_decompose(inp)
            return sum((w * b).sum() for w, b in zip(weights, bands))

        scalar_fn(x).backward()
        analytic = x.grad.clone()
        eps = 1e-5
        with torch.no_grad():
            fd = torch.zeros_like(x)
            flat = x.reshape(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + eps
                up = scalar_fn(x).item()
                flat[i] = orig - eps
                dn = scalar_fn(x).item()
                flat[i] = orig
                fd.reshape(-1)[i] = (up - dn) / (2 * eps)
        denom = analytic.abs().clamp(min=1e-8)
        assert float(((analytic - fd).abs() / denom).max()) < 1e-3
