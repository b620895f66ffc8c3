"""
Brute-force reference implementations. Each one is written independently of the code it checks:
explicit sums and loops, no FFTs, no scipy.
"""

import itertools
import math

import numpy as np


def dft_matrix(n: int, inverse: bool = False) -> np.ndarray:
	sign = 1.0 if inverse else -1.0
	k = np.arange(n)
	return np.exp(sign * 2j * np.pi * np.outer(k, k) / n)


def direct_dft3(x: np.ndarray) -> np.ndarray:
	"""Unnormalized forward DFT over the last three axes by dense matrix products."""
	d, h, w = x.shape[-3:]
	out = np.einsum('...dhw,wv->...dhv', x.astype(np.complex128), dft_matrix(w))
	out = np.einsum('...dhv,hu->...duv', out, dft_matrix(h))
	return np.einsum('...duv,dt->...tuv', out, dft_matrix(d))


def circular_convolution3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
	"""(a * b)[n] = sum_m a[m] b[(n - m) mod N] over the last three axes."""
	d, h, w = a.shape[-3:]
	out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=np.float64)
	for i, j, k in itertools.product(range(d), range(h), range(w)):
		out += a[..., i : i + 1, j : j + 1, k : k + 1] * np.roll(b, shift=(i, j, k), axis=(-3, -2, -1))
	return out


def naive_conv3d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None = None, stride: int = 1, padding: int = 0, groups: int = 1) -> np.ndarray:
	"""Cross-correlation, one output voxel at a time."""
	batch, cin, d, h, w = x.shape
	cout, cin_g, k = weight.shape[0], weight.shape[1], weight.shape[2]
	cout_g = cout // groups
	padded = np.pad(x, ((0, 0), (0, 0)) + ((padding, padding),) * 3)
	extents = [(n + 2 * padding - k) // stride + 1 for n in (d, h, w)]
	out = np.zeros((batch, cout) + tuple(extents))
	for b, o in itertools.product(range(batch), range(cout)):
		g = o // cout_g
		channels = slice(g * cin_g, (g + 1) * cin_g)
		for i, j, l in itertools.product(*(range(n) for n in extents)):
			window = padded[b, channels, i * stride : i * stride + k, j * stride : j * stride + k, l * stride : l * stride + k]
			out[b, o, i, j, l] = np.sum(window * weight[o])
		if bias is not None:
			out[b, o] += bias[o]
	return out


def naive_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
	rows, inner = a.shape
	cols = b.shape[1]
	out = np.zeros((rows, cols))
	for i in range(rows):
		for j in range(cols):
			total = 0.0
			for k in range(inner):
				total += a[i, k] * b[k, j]
			out[i, j] = total
	return out


def signed_frequency(index: int, n: int) -> float:
	"""Frequency of FFT bin `index` in cycles per sample, in [-0.5, 0.5)."""
	return (index if index < (n + 1) // 2 else index - n) / n


def radius_by_enumeration(extents: tuple[int, int, int]) -> np.ndarray:
	"""Normalized radius of every bin: Euclidean norm of (f / 0.5) per axis, divided by sqrt(3)."""
	out = np.zeros(extents)
	for index in itertools.product(*(range(n) for n in extents)):
		squared = sum((signed_frequency(i, n) / 0.5) ** 2 for i, n in zip(index, extents))
		out[index] = math.sqrt(squared) / math.sqrt(3.0)
	return out


def surface_voxels(mask: np.ndarray) -> list[tuple[int, int, int]]:
	"""Labeled voxels with a six-connected neighbor that is unlabeled or outside the volume."""
	surface = []
	for index in zip(*np.nonzero(mask)):
		for axis, step in itertools.product(range(3), (-1, 1)):
			neighbor = list(index)
			neighbor[axis] += step
			if not 0 <= neighbor[axis] < mask.shape[axis] or not mask[tuple(neighbor)]:
				surface.append(tuple(int(i) for i in index))
				break
	return surface


def exact_hd95(pred: np.ndarray, true: np.ndarray, spacing=(1.0, 1.0, 1.0)) -> float:
	"""Pooled 95th percentile of both directed surface distance sets, by enumerating every pair."""
	a, b = surface_voxels(pred), surface_voxels(true)
	if not a and not b:
		return 0.0
	if not a or not b:
		return math.inf

	def directed(src, dst):
		return [min(math.dist([s * c for s, c in zip(p, spacing)], [s * c for s, c in zip(q, spacing)]) for q in dst) for p in src]

	return float(np.percentile(directed(a, b) + directed(b, a), 95))


def set_count_dice(pred: np.ndarray, true: np.ndarray, class_id: int) -> float:
	p = {tuple(i) for i in np.argwhere(pred == class_id)}
	g = {tuple(i) for i in np.argwhere(true == class_id)}
	if not p and not g:
		return 100.0
	return 100.0 * 2 * len(p & g) / (len(p) + len(g))
