import logging

import numpy as np

from feformer.exceptions import ShapeError
from feformer.harness.views import Phantom

logger = logging.getLogger(__name__)


def mirror(p: Phantom, axes: tuple[int, ...]) -> Phantom:
	"""Flip volume and labels along the given spatial axes (0, 1, 2 = D, H, W)."""
	if not axes:
		return Phantom(volume=p.volume.copy(), labels=p.labels.copy(), spec=p.spec)
	volume = np.flip(p.volume, axis=tuple(a + 2 for a in axes))
	labels = np.flip(p.labels, axis=tuple(axes))
	return Phantom(volume=np.ascontiguousarray(volume), labels=np.ascontiguousarray(labels), spec=p.spec)


def augment(
	p: Phantom,
	seed,
	mirror_prob: float = 0.5,
	noise_var_max: float = 0.1,
	brightness_prob: float = 0.15,
	brightness_range: float = 0.1,
) -> Phantom:
	"""Random per-axis mirror, additive Gaussian noise and brightness shift; deterministic under `seed`.

	Random draws happen in a fixed order whatever the probabilities, so one seed always maps to the
	same mirror axes, noise field and shift.
	"""
	rng = np.random.default_rng(seed)
	flips = rng.random(3) < mirror_prob
	out = mirror(p, tuple(int(a) for a in np.flatnonzero(flips)))

	variance = rng.uniform(0.0, noise_var_max)
	noise = rng.standard_normal(out.volume.shape)
	if variance > 0:
		out.volume = out.volume + np.sqrt(variance) * noise

	shift_draw, shift = rng.random(), rng.uniform(-brightness_range, brightness_range)
	if shift_draw < brightness_prob:
		out.volume = out.volume + shift
	return out


def normalize_intensity(volume: np.ndarray, lower_pct: float = 5.0, upper_pct: float = 95.0) -> np.ndarray:
	"""Clip to the given percentiles, then z-score with the population standard deviation."""
	lower, upper = np.percentile(volume, [lower_pct, upper_pct])
	clipped = np.clip(volume, lower, upper)
	std = clipped.std()
	if std == 0:
		return np.zeros_like(clipped)
	return (clipped - clipped.mean()) / std


def random_crop(p: Phantom, size: int, rng: np.random.Generator) -> Phantom:
	extent = p.labels.shape
	if any(size > n for n in extent):
		raise ShapeError(f'crop size {size} exceeds volume extents {extent}')
	if all(size == n for n in extent):
		return p
	start = [int(rng.integers(0, n - size + 1)) for n in extent]
	window = tuple(slice(s, s + size) for s in start)
	return Phantom(volume=p.volume[(Ellipsis,) + window].copy(), labels=p.labels[window].copy(), spec=p.spec)
