import logging

import numpy as np

from feformer.exceptions import ShapeError
from feformer.harness.views import Phantom, ShapeSpec

logger = logging.getLogger(__name__)

SHAPE_KINDS = ('sphere', 'box', 'tube')
MAX_PLACEMENT_TRIES = 50


def rasterize_shape(shape: ShapeSpec, extent: int) -> np.ndarray:
	"""Boolean (E, E, E) mask of the voxels whose centers fall inside the shape."""
	grid = np.indices((extent,) * 3)
	offsets = [grid[a] - shape.center[a] for a in range(3)]
	if shape.kind == 'sphere':
		return sum(o**2 for o in offsets) <= shape.size**2
	if shape.kind == 'box':
		return np.logical_and.reduce([np.abs(o) <= shape.size for o in offsets])
	radial = sum(offsets[a] ** 2 for a in range(3) if a != shape.axis)
	return (radial <= shape.size**2) & (np.abs(offsets[shape.axis]) <= shape.half_length)


def _draw_shape(rng: np.random.Generator, extent: int, class_id: int, intensity: float) -> ShapeSpec:
	kind = SHAPE_KINDS[int(rng.integers(len(SHAPE_KINDS)))]
	low, high = max(extent // 8, 1), max(extent // 4, 2)
	size = int(rng.integers(low, high + 1))
	axis = int(rng.integers(3))
	half_length = int(rng.integers(size, max(extent // 3, size + 1) + 1)) if kind == 'tube' else 0
	spec = ShapeSpec(kind=kind, center=(0, 0, 0), size=size, class_id=class_id, intensity=intensity, half_length=half_length, axis=axis)
	reach = spec.reach
	if any(2 * r + 1 > extent for r in reach):
		raise ShapeError(f'{kind} with reach {reach} cannot fit in a volume of extent {extent}')
	center = tuple(int(rng.integers(r, extent - r)) for r in reach)
	return ShapeSpec(kind=kind, center=center, size=size, class_id=class_id, intensity=intensity, half_length=half_length, axis=axis)


def class_intensity(class_id: int, n_classes: int) -> float:
	return 0.2 + 0.8 * class_id / max(n_classes - 1, 1)


def paint_phantom(specs: list[ShapeSpec], extent: int) -> Phantom:
	"""Paint shapes in order onto a zero background; later shapes never overwrite earlier ones."""
	volume = np.zeros((extent,) * 3, dtype=np.float64)
	labels = np.zeros((extent,) * 3, dtype=np.int64)
	for spec in specs:
		if any(c - r < 0 or c + r >= extent for c, r in zip(spec.center, spec.reach)):
			raise ShapeError(f'{spec.kind} at {spec.center} with reach {spec.reach} does not fit in extent {extent}')
		mask = rasterize_shape(spec, extent) & (labels == 0)
		if not mask.any():
			raise ShapeError(f'{spec.kind} for class {spec.class_id} is fully covered by earlier shapes')
		labels[mask] = spec.class_id
		volume[mask] = spec.intensity
	return Phantom(volume=volume[None, None], labels=labels, spec=list(specs))


def phantom_generate(seed: int, extent: int, n_classes: int, count: int) -> list[Phantom]:
	"""`count` phantoms, each with one shape per foreground class, deterministic under `seed`."""
	if extent <= 0 or count <= 0 or n_classes < 2:
		raise ShapeError(f'need positive extent and count and at least 2 classes, got {extent}, {count}, {n_classes}')
	rng = np.random.default_rng(seed)
	phantoms = []
	for index in range(count):
		for _ in range(MAX_PLACEMENT_TRIES):
			specs = [_draw_shape(rng, extent, c, class_intensity(c, n_classes)) for c in range(1, n_classes)]
			try:
				phantoms.append(paint_phantom(specs, extent))
				break
			except ShapeError:
				continue
		else:
			raise ShapeError(f'could not place {n_classes - 1} non-overlapping shapes in a {extent}^3 volume')
		logger.debug(f'phantom {index}: ' + ', '.join(f'{s.kind}(class {s.class_id}, size {s.size})' for s in specs))
	return phantoms
