import numpy as np
import pytest

from feformer.checks.oracles import circular_convolution3, direct_dft3
from feformer.exceptions import ShapeError, SpectralError
from feformer.spectral.service import (
	band_magnitude_means,
	band_masks,
	dwt3_haar,
	fft3,
	flipped_detail_sign,
	idwt3_haar,
	ifft3,
	is_fft_friendly,
	spectral_product,
)
from feformer.spectral.views import SUBBAND_KEYS
from feformer.tensor.service import Tensor


class TestFourier:
	@pytest.mark.parametrize('n', [2, 4, 8])
	def test_round_trip(self, rng, n):
		x = rng.standard_normal((2, 3, n, n, n))
		np.testing.assert_allclose(ifft3(fft3(Tensor(x))).data, x, atol=1e-10)

	def test_matches_direct_dft_on_a_mixed_grid(self, rng):
		x = rng.standard_normal((1, 2, 6, 4, 10))
		np.testing.assert_allclose(fft3(Tensor(x)).data, direct_dft3(x), atol=1e-9)

	def test_parseval(self, rng):
		x = rng.standard_normal((1, 1, 8, 8, 8))
		spectrum = fft3(Tensor(x)).data
		assert np.sum(x**2) == pytest.approx(np.sum(np.abs(spectrum) ** 2) / 512, rel=1e-10)

	def test_convolution_theorem(self, rng):
		a, b = rng.standard_normal((1, 2, 4, 4, 4)), rng.standard_normal((1, 2, 4, 4, 4))
		np.testing.assert_allclose(spectral_product(Tensor(a), Tensor(b)).data, circular_convolution3(a, b), atol=1e-9)

	def test_non_hermitian_spectrum_is_rejected(self, rng):
		spectrum = rng.standard_normal((1, 1, 4, 4, 4)) + 1j * rng.standard_normal((1, 1, 4, 4, 4))
		with pytest.raises(SpectralError, match='Hermitian'):
			ifft3(Tensor(spectrum), tol=1e-8)

	def test_real_spectrum_residue_is_tiny(self, rng):
		_, residue = ifft3(fft3(Tensor(rng.standard_normal((1, 1, 8, 8, 8)))), tol=1e-8, return_residue=True)
		assert residue < 1e-12

	def test_unfriendly_extent(self, rng):
		assert is_fft_friendly(30) and not is_fft_friendly(7)
		with pytest.raises(SpectralError, match='unsupported FFT extents'):
			fft3(Tensor(rng.standard_normal((1, 1, 7, 8, 8))))

	def test_needs_three_spatial_axes(self):
		with pytest.raises(ShapeError):
			fft3(Tensor(np.zeros((4, 4))))


class TestBandMasks:
	@pytest.mark.parametrize('extents', [(2, 2, 2), (8, 8, 8), (6, 4, 10)])
	def test_partition(self, extents):
		masks = band_masks(extents)
		total = masks.low + masks.mid + masks.high
		np.testing.assert_array_equal(total, np.ones(extents))
		assert sum(masks.counts()) == int(np.prod(extents))

	def test_dc_is_low(self):
		masks = band_masks((8, 8, 8))
		assert masks.low[0, 0, 0] == 1.0

	def test_nyquist_corner_is_high(self):
		masks = band_masks((8, 8, 8))
		assert masks.high[4, 4, 4] == 1.0

	@pytest.mark.parametrize('cutoffs', [(0.5, 0.5), (0.0, 0.5), (0.6, 0.3), (0.2, 1.5)])
	def test_degenerate_cutoffs(self, cutoffs):
		with pytest.raises(SpectralError, match='degenerate band cutoffs'):
			band_masks((4, 4, 4), cutoffs)

	def test_magnitude_means_layout(self, rng):
		x = Tensor(rng.standard_normal((2, 3, 8, 8, 8)))
		means = band_magnitude_means(x, band_masks((8, 8, 8)))
		assert means.shape == (2, 9)
		assert np.all(means.data >= 0)

	def test_empty_band_contributes_zero(self):
		# on a 1^3 grid only the DC bin exists
		masks = band_masks((1, 1, 1))
		assert masks.counts() == (1, 0, 0)
		means = band_magnitude_means(Tensor(np.full((1, 2, 1, 1, 1), 3.0)), masks)
		np.testing.assert_allclose(means.data, [[3.0, 3.0, 0.0, 0.0, 0.0, 0.0]])


class TestHaar:
	def test_round_trip(self, rng):
		x = rng.standard_normal((2, 3, 8, 4, 6))
		np.testing.assert_allclose(idwt3_haar(dwt3_haar(Tensor(x))).data, x, atol=1e-12)

	def test_energy(self, rng):
		x = rng.standard_normal((1, 2, 8, 8, 8))
		assert dwt3_haar(Tensor(x)).energy() == pytest.approx(float(np.sum(x**2)), rel=1e-12)

	def test_constant_input(self):
		bands = dwt3_haar(Tensor(np.full((1, 1, 4, 4, 4), 1.5)))
		np.testing.assert_allclose(bands['LLL'].data, np.full((1, 1, 2, 2, 2), 1.5 * 2 * np.sqrt(2)))
		for key in SUBBAND_KEYS[1:]:
			np.testing.assert_allclose(bands[key].data, 0.0, atol=1e-15)

	def test_subband_shapes(self, rng):
		bands = dwt3_haar(Tensor(rng.standard_normal((2, 3, 8, 8, 8))))
		assert list(bands) == list(SUBBAND_KEYS)
		assert all(bands[key].shape == (2, 3, 4, 4, 4) for key in SUBBAND_KEYS)

	def test_odd_extent(self, rng):
		with pytest.raises(ShapeError, match='even spatial extents'):
			dwt3_haar(Tensor(rng.standard_normal((1, 1, 5, 4, 4))))

	def test_flipped_detail_sign_breaks_the_round_trip(self, rng):
		x = rng.standard_normal((1, 1, 4, 4, 4))
		with flipped_detail_sign():
			back = idwt3_haar(dwt3_haar(Tensor(x))).data
		assert np.max(np.abs(back - x)) > 1e-3
		np.testing.assert_allclose(idwt3_haar(dwt3_haar(Tensor(x))).data, x, atol=1e-12)
