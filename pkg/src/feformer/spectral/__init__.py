from feformer.spectral.service import (
	band_decompose,
	band_magnitude_means,
	band_masks,
	cabs,
	dwt3_haar,
	fft3,
	flipped_detail_sign,
	idwt3_haar,
	ifft3,
	imag_part,
	is_fft_friendly,
	make_complex,
	real_part,
	spectral_product,
)
from feformer.spectral.views import SUBBAND_KEYS, BandMasks, SubbandSet

__all__ = [
	'SUBBAND_KEYS',
	'BandMasks',
	'SubbandSet',
	'band_decompose',
	'band_magnitude_means',
	'band_masks',
	'cabs',
	'dwt3_haar',
	'fft3',
	'flipped_detail_sign',
	'idwt3_haar',
	'ifft3',
	'imag_part',
	'is_fft_friendly',
	'make_complex',
	'real_part',
	'spectral_product',
]
