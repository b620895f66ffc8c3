"""
3D Fourier transforms, radial band masks and the orthonormal Haar analysis/synthesis pair.

FFT normalization is unnormalized forward, 1/N inverse. Backward rules use the complex gradient
convention of `feformer.tensor.service`:

	fft3:  grad_x = N * ifftn(G)   (real part for real inputs)
	ifft3: grad_s = fftn(g) / N    (real output, so g is real)
"""

import logging
from contextlib import contextmanager
from functools import lru_cache
from typing import Iterator

import numpy as np

from feformer.exceptions import ShapeError, SpectralError
from feformer.spectral.views import SUBBAND_KEYS, BandMasks, SubbandSet
from feformer.tensor.service import ComplexTensor, Tensor, apply_op, as_tensor, concat, getitem, reshape, sum_
from feformer.tensor.service import mul as tensor_mul

logger = logging.getLogger(__name__)

SPATIAL_AXES = (-3, -2, -1)
_SQRT_HALF = np.sqrt(0.5)

# Sign of the analysis detail coefficient; synthesis always assumes +1.
_detail_sign = 1.0


def is_fft_friendly(n: int) -> bool:
	if n <= 0:
		return False
	for factor in (2, 3, 5):
		while n % factor == 0:
			n //= factor
	return n == 1


def _check_extents(shape: tuple[int, ...]) -> tuple[int, int, int]:
	if len(shape) < 3:
		raise ShapeError(f'spectral ops need at least 3 trailing spatial axes, got shape {shape}')
	extents = tuple(shape[-3:])
	bad = [n for n in extents if not is_fft_friendly(n)]
	if bad:
		raise SpectralError(f'unsupported FFT extents {extents}: {bad} do not factor into 2, 3 and 5')
	return extents


def fft3(x) -> ComplexTensor:
	x = as_tensor(x)
	extents = _check_extents(x.shape)
	count = int(np.prod(extents))
	real_input = not x.is_complex

	def vjp(g):
		grad = np.fft.ifftn(g, axes=SPATIAL_AXES) * count
		return (grad.real if real_input else grad,)

	out = apply_op('fft3', np.fft.fftn(x.data, axes=SPATIAL_AXES), (x,), vjp)
	out.spatial_shape = extents
	return out


def ifft3(s, tol: float | None = None, return_residue: bool = False):
	"""Normalized inverse transform returning the real plane.

	The max absolute imaginary residue, relative to the largest real magnitude, is logged; with `tol`
	it must not exceed that bound.
	"""
	s = as_tensor(s)
	extents = _check_extents(s.shape)
	count = int(np.prod(extents))
	full = np.fft.ifftn(s.data, axes=SPATIAL_AXES)
	scale = max(float(np.max(np.abs(full.real))) if full.size else 0.0, 1e-300)
	residue = float(np.max(np.abs(full.imag))) / scale if full.size else 0.0
	if tol is not None and residue > tol:
		raise SpectralError(f'imaginary residue {residue:.3e} exceeds tolerance {tol:.1e}; spectrum is not Hermitian')
	logger.debug(f'ifft3 imaginary residue {residue:.3e} (relative)')

	def vjp(g):
		return (np.fft.fftn(g, axes=SPATIAL_AXES) / count,)

	out = apply_op('ifft3', np.ascontiguousarray(full.real), (s,), vjp)
	if return_residue:
		return out, residue
	return out


def real_part(z) -> Tensor:
	z = as_tensor(z)
	return apply_op('real', np.ascontiguousarray(np.real(z.data)), (z,), lambda g: (g.astype(np.complex128),))


def imag_part(z) -> Tensor:
	z = as_tensor(z)
	return apply_op('imag', np.ascontiguousarray(np.imag(z.data)), (z,), lambda g: (1j * g,))


def make_complex(re, im) -> ComplexTensor:
	re, im = as_tensor(re), as_tensor(im)
	return apply_op('complex', re.data + 1j * im.data, (re, im), lambda g: (np.real(g), np.imag(g)))


def cabs(z) -> Tensor:
	"""Complex modulus. The gradient at an exact zero is taken as 0."""
	z = as_tensor(z)
	magnitude = np.abs(z.data)
	safe = np.where(magnitude > 0, magnitude, 1.0)

	def vjp(g):
		return (np.where(magnitude > 0, g * z.data / safe, 0.0),)

	return apply_op('cabs', magnitude, (z,), vjp)


def spectral_product(a, b) -> Tensor:
	"""ifft3(fft3(a) * fft3(b)): the circular convolution of a and b over the spatial axes."""
	return ifft3(tensor_mul(fft3(a), fft3(b)))


@lru_cache(maxsize=64)
def _radius_grid(extents: tuple[int, int, int]) -> np.ndarray:
	fd, fh, fw = (np.fft.fftfreq(n) / 0.5 for n in extents)
	squared = fd[:, None, None] ** 2 + fh[None, :, None] ** 2 + fw[None, None, :] ** 2
	return np.sqrt(squared) / np.sqrt(3.0)


def band_masks(extents: tuple[int, int, int], cutoffs: tuple[float, float] = (1 / 3, 2 / 3)) -> BandMasks:
	r1, r2 = cutoffs
	if not 0 < r1 < r2 <= 1:
		raise SpectralError(f'degenerate band cutoffs {cutoffs}: need 0 < r1 < r2 <= 1')
	extents = tuple(int(n) for n in extents)
	if len(extents) != 3 or any(n <= 0 for n in extents):
		raise ShapeError(f'band masks need three positive extents, got {extents}')
	radius = _radius_grid(extents)
	low = (radius <= r1).astype(np.float64)
	mid = ((radius > r1) & (radius <= r2)).astype(np.float64)
	high = (radius > r2).astype(np.float64)
	return BandMasks(low=low, mid=mid, high=high, cutoffs=(float(r1), float(r2)))


def band_decompose(s: ComplexTensor, masks: BandMasks) -> tuple[ComplexTensor, ComplexTensor, ComplexTensor]:
	if tuple(s.shape[-3:]) != masks.extents:
		raise ShapeError(f'spectrum extents {s.shape[-3:]} do not match band masks {masks.extents}')
	return tuple(tensor_mul(s, Tensor(mask)) for mask in masks.as_list())


def band_magnitude_means(x: Tensor, masks: BandMasks) -> Tensor:
	"""Mean |fft3(x)| over each band's support, concatenated as (B, 3C) in low, mid, high order.

	A band without bins on this grid contributes 0.
	"""
	magnitude = cabs(fft3(x))
	means = []
	for name, mask in zip(('low', 'mid', 'high'), masks.as_list()):
		count = float(mask.sum())
		if count == 0:
			logger.debug(f'{name} band is empty on a {masks.extents} grid; its descriptor is 0')
		summed = sum_(tensor_mul(magnitude, Tensor(mask)), axis=SPATIAL_AXES)
		means.append(tensor_mul(summed, 1.0 / max(count, 1.0)))
	return concat(means, axis=-1)


def _axis_index(ndim: int, axis: int, index) -> tuple:
	key = [slice(None)] * ndim
	key[axis] = index
	return tuple(key)


def _haar_analysis(data: np.ndarray, sign: float) -> np.ndarray:
	out = data
	for axis in (-1, -2, -3):
		even = out[_axis_index(out.ndim, axis, slice(0, None, 2))]
		odd = out[_axis_index(out.ndim, axis, slice(1, None, 2))]
		out = np.stack([(even + odd) * _SQRT_HALF, sign * (even - odd) * _SQRT_HALF], axis=0)
	# leading axes are now (d, h, w) selectors
	return out.reshape((8,) + out.shape[3:])


def _haar_synthesis(stacked: np.ndarray) -> np.ndarray:
	out = stacked.reshape((2, 2, 2) + stacked.shape[1:])
	for axis in (-3, -2, -1):
		low, high = out[0], out[1]
		shape = list(low.shape)
		shape[axis] *= 2
		merged = np.empty(shape, dtype=np.result_type(low, high))
		merged[_axis_index(merged.ndim, axis, slice(0, None, 2))] = (low + high) * _SQRT_HALF
		merged[_axis_index(merged.ndim, axis, slice(1, None, 2))] = (low - high) * _SQRT_HALF
		out = merged
	return out


def dwt3_haar(x) -> SubbandSet:
	x = as_tensor(x)
	if x.ndim < 3:
		raise ShapeError(f'Haar transform needs three spatial axes, got shape {x.shape}')
	odd = [n for n in x.shape[-3:] if n % 2]
	if odd:
		raise ShapeError(f'Haar transform needs even spatial extents, got {x.shape[-3:]}')
	sign = _detail_sign
	stacked = apply_op('dwt3_haar', _haar_analysis(x.data, sign), (x,), lambda g: (_haar_synthesis(g),))
	bands = {key: getitem(stacked, (i,)) for i, key in enumerate(SUBBAND_KEYS)}
	return SubbandSet(bands=bands, source_shape=x.shape)


def idwt3_haar(s: SubbandSet) -> Tensor:
	shapes = {key: s.bands[key].shape for key in SUBBAND_KEYS}
	expected = tuple(s.source_shape[:-3]) + tuple(n // 2 for n in s.source_shape[-3:])
	bad = {key: shape for key, shape in shapes.items() if shape != expected}
	if bad:
		raise ShapeError(f'subband shapes {bad} are inconsistent with source shape {s.source_shape}')
	stacked = concat([reshape(s.bands[key], (1,) + expected) for key in SUBBAND_KEYS], axis=0)
	return apply_op('idwt3_haar', _haar_synthesis(stacked.data), (stacked,), lambda g: (_haar_analysis(g, 1.0),))


@contextmanager
def flipped_detail_sign() -> Iterator[None]:
	"""Negative-control hook: analysis uses (b - a) while synthesis still assumes (a - b)."""
	global _detail_sign
	_detail_sign = -1.0
	try:
		yield
	finally:
		_detail_sign = 1.0
