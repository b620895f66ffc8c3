from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from feformer.tensor.service import Tensor

SUBBAND_KEYS: tuple[str, ...] = ('LLL', 'LLH', 'LHL', 'LHH', 'HLL', 'HLH', 'HHL', 'HHH')


@dataclass(frozen=True)
class BandMasks:
	"""Hard radial partition of an unshifted FFT grid into low, mid and high bins."""

	low: np.ndarray
	mid: np.ndarray
	high: np.ndarray
	cutoffs: tuple[float, float]

	@property
	def extents(self) -> tuple[int, int, int]:
		return tuple(self.low.shape)

	def as_list(self) -> list[np.ndarray]:
		return [self.low, self.mid, self.high]

	def counts(self) -> tuple[int, int, int]:
		return int(self.low.sum()), int(self.mid.sum()), int(self.high.sum())


@dataclass
class SubbandSet:
	"""The eight Haar subbands of one tensor. Key letters run over (D, H, W); H marks the detail half."""

	bands: dict[str, Tensor]
	source_shape: tuple[int, ...]

	def __getitem__(self, key: str) -> Tensor:
		return self.bands[key]

	def __iter__(self):
		return iter(SUBBAND_KEYS)

	def energy(self) -> float:
		return float(sum(np.sum(np.abs(self.bands[key].data) ** 2) for key in SUBBAND_KEYS))
