from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from feformer.nn.views import ConvSpec
from feformer.tensor.service import Tensor


@dataclass
class RunMode:
	"""Per-call switches: batch-norm statistics, dropout and the dropout generator."""

	training: bool = True
	rng: np.random.Generator | None = None


@dataclass
class ConvParams:
	spec: ConvSpec
	weight: Tensor
	bias: Tensor | None


@dataclass
class LinearParams:
	weight: Tensor
	bias: Tensor | None


@dataclass
class NormParams:
	gamma: Tensor
	beta: Tensor


@dataclass
class BatchNormParams:
	gamma: Tensor
	beta: Tensor
	running_mean: np.ndarray
	running_var: np.ndarray
	tracked: np.ndarray


@dataclass
class FdsaParams:
	dw7: ConvParams
	q: LinearParams
	k: LinearParams
	v: LinearParams
	fc1: LinearParams | None
	fc2: LinearParams | None
	cutoffs: tuple[float, float] = (1 / 3, 2 / 3)

	@property
	def channels(self) -> int:
		return self.dw7.spec.in_channels


@dataclass
class StandardAttentionParams:
	q: LinearParams
	k: LinearParams
	v: LinearParams
	o: LinearParams
	num_heads: int = 1


@dataclass
class FgmlpParams:
	lin1: LinearParams
	lin2: LinearParams
	kernel_gen1: ConvParams | None
	kernel_gen2: ConvParams | None
	modulator: ConvParams | None
	k: int = 3
	dropout: float = 0.0
	gate: str | None = 'relu6'


@dataclass
class WaffParams:
	"""One fuse conv shared by all eight subbands, or one per subband."""

	fuse: list[ConvParams]

	def for_band(self, index: int) -> ConvParams:
		return self.fuse[index if len(self.fuse) > 1 else 0]


@dataclass
class ConcatFuseParams:
	conv: ConvParams


@dataclass
class ConvBnLayer:
	conv: ConvParams
	norm: BatchNormParams


@dataclass
class StemParams:
	encoder: list[tuple[ConvBnLayer, ConvBnLayer]]
	decoder: list[tuple[ConvBnLayer, ConvBnLayer]]
	head: ConvParams
	upsample: str = 'trilinear'


@dataclass
class FcsbParams:
	spectral_conv: ConvParams
	spectral_norm: BatchNormParams
	restore: ConvParams
	q: LinearParams
	k: LinearParams
	v: LinearParams
	upsample: str = 'trilinear'


@dataclass
class BlockParams:
	"""LN -> token mixer -> residual, LN -> channel mixer -> residual."""

	norm1: NormParams
	attention: FdsaParams | StandardAttentionParams
	norm2: NormParams
	mlp: FgmlpParams
	attention_kind: str = 'fdsa'
	mlp_kind: str = 'fgmlp'


@dataclass
class StageParams:
	blocks: list[BlockParams] = field(default_factory=list)
	merge: ConvParams | None = None
	merge_norm: NormParams | None = None
	expand: ConvParams | None = None
	fusion: WaffParams | ConcatFuseParams | None = None
