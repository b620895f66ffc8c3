from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from feformer.exceptions import ShapeError

HD95_FAILURE = math.inf

ShapeKind = Literal['sphere', 'box', 'tube']


def is_failure(value: float) -> bool:
	return math.isinf(value)


@dataclass(frozen=True)
class ShapeSpec:
	"""One painted shape. `size` is the radius (sphere, tube) or half-edge (box); tubes also carry
	a half-length and the axis they run along."""

	kind: ShapeKind
	center: tuple[int, int, int]
	size: int
	class_id: int
	intensity: float
	half_length: int = 0
	axis: int = 0

	def __post_init__(self):
		if self.size <= 0:
			raise ShapeError(f'{self.kind} size must be positive, got {self.size}')
		if self.kind == 'tube' and self.half_length <= 0:
			raise ShapeError(f'tube half-length must be positive, got {self.half_length}')

	@property
	def reach(self) -> tuple[int, int, int]:
		"""Voxels the shape extends from its center along each axis."""
		if self.kind == 'tube':
			return tuple(self.half_length if a == self.axis else self.size for a in range(3))
		return (self.size,) * 3


@dataclass
class Phantom:
	"""Synthetic volume (1, 1, E, E, E) in [0, 1] with integer labels (E, E, E); class 0 is background."""

	volume: np.ndarray
	labels: np.ndarray
	spec: list[ShapeSpec] = field(default_factory=list)

	@property
	def extent(self) -> tuple[int, int, int]:
		return tuple(self.labels.shape)


@dataclass
class OptimState:
	"""AdamW moments keyed by parameter name, with the hyperparameters they were built under."""

	m: dict[str, np.ndarray]
	v: dict[str, np.ndarray]
	step: int = 0
	lr: float = 1e-3
	betas: tuple[float, float] = (0.9, 0.999)
	eps: float = 1e-8
	weight_decay: float = 0.01


@dataclass
class EvalResult:
	step: int
	dice: dict[int, float]
	hd95: dict[int, float]

	@property
	def mean_dice(self) -> float:
		return float(np.mean(list(self.dice.values()))) if self.dice else 0.0

	@property
	def mean_hd95(self) -> float:
		values = list(self.hd95.values())
		return float(np.mean(values)) if values else 0.0


@dataclass
class HistoryRow:
	step: int
	lr: float
	loss: float
	dice: dict[int, float] | None = None


@dataclass
class TrainResult:
	history: list[HistoryRow]
	evals: list[EvalResult]
	final_checkpoint: str | None = None
