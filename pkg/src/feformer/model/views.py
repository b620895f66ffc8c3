from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from feformer.blocks.views import BlockParams, FcsbParams, StageParams, StemParams
from feformer.nn.params import ParamStore

STAGE_NAMES = ('encoder0', 'encoder1', 'encoder2', 'bottleneck', 'decoder2', 'decoder1', 'decoder0')
DOWNSAMPLE = 32


class ModelConfig(BaseModel):
	"""Architecture hyperparameters. Defaults are the full-size segmentation network."""

	model_config = ConfigDict(extra='forbid', validate_assignment=True)

	in_channels: int = Field(default=1, ge=1)
	n_classes: int = Field(default=16, ge=2)
	C: int = Field(default=64, ge=4)
	depths: list[int] = Field(default_factory=lambda: [2] * 7)
	mlp_ratio: int = Field(default=4, ge=1)
	cutoffs: tuple[float, float] = (1 / 3, 2 / 3)
	lowpass_k: int = Field(default=3, ge=1)
	dropout: float = Field(default=0.0, ge=0.0, lt=1.0)
	seed: int = 0

	attention: Literal['fdsa', 'frequency', 'standard'] = 'fdsa'
	mlp: Literal['fgmlp', 'gated', 'standard'] = 'fgmlp'
	fusion: Literal['waff', 'concat'] = 'waff'
	stem_bridge: bool = True
	num_heads: int = Field(default=1, ge=1)
	waff_shared: bool = True
	kernel_generator: Literal['grouped', 'dense'] = 'grouped'
	gate_activation: Literal['relu6', 'gelu', 'sigmoid'] = 'relu6'
	upsample: Literal['trilinear', 'nearest'] = 'trilinear'
	debug_shapes: bool = False

	@field_validator('depths', mode='before')
	@classmethod
	def broadcast_depths(cls, value):
		if isinstance(value, int):
			return [value] * 7
		if isinstance(value, str):
			parts = [int(v) for v in value.replace(' ', '').split(',') if v]
			return parts * 7 if len(parts) == 1 else parts
		return value

	@model_validator(mode='after')
	def check_consistency(self) -> 'ModelConfig':
		if len(self.depths) != 7 or any(d < 0 for d in self.depths):
			raise ValueError(f'depths needs 7 non-negative entries (3 encoder, bottleneck, 3 decoder), got {self.depths}')
		if self.C % 4:
			raise ValueError(f'C must be divisible by 4, got {self.C}')
		if not 0 < self.cutoffs[0] < self.cutoffs[1] <= 1:
			raise ValueError(f'cutoffs must satisfy 0 < r1 < r2 <= 1, got {self.cutoffs}')
		if self.lowpass_k % 2 == 0:
			raise ValueError(f'lowpass_k must be odd, got {self.lowpass_k}')
		if self.attention == 'standard' and self.C % self.num_heads:
			raise ValueError(f'C={self.C} is not divisible by num_heads={self.num_heads}')
		return self

	def stage_channels(self) -> list[int]:
		c = self.C
		return [c, 2 * c, 4 * c, 8 * c, 4 * c, 2 * c, c]


@dataclass
class FEFormer:
	"""Assembled network: parameter records laid out in data-flow order, all backed by `store`."""

	config: ModelConfig
	store: ParamStore
	stem: StemParams
	bridge: FcsbParams | None
	stages: dict[str, StageParams] = field(default_factory=dict)

	def blocks(self) -> list[BlockParams]:
		return [block for name in STAGE_NAMES for block in self.stages[name].blocks]


@dataclass
class ForwardTrace:
	"""Feature shapes seen during one forward pass, keyed by location."""

	shapes: dict[str, tuple[int, ...]] = field(default_factory=dict)

	def record(self, name: str, shape: tuple[int, ...]) -> None:
		self.shapes[name] = tuple(shape)


@dataclass
class DeltaRow:
	decision: str
	params_delta: int
	method: str


@dataclass
class ParamReport:
	total: int
	breakdown: dict[str, int]
	deltas: list[DeltaRow] = field(default_factory=list)
	target: int = 18_540_000

	@property
	def relative_gap(self) -> float:
		return (self.total - self.target) / self.target


@dataclass
class FlopReport:
	entries: list[tuple[str, int]] = field(default_factory=list)
	target: int = 39_130_000_000

	def add(self, name: str, flops: float) -> None:
		self.entries.append((name, int(round(flops))))

	@property
	def total(self) -> int:
		return sum(flops for _, flops in self.entries)

	@property
	def relative_gap(self) -> float:
		return (self.total - self.target) / self.target

	def by_prefix(self) -> dict[str, int]:
		grouped: dict[str, int] = {}
		for name, flops in self.entries:
			key = name.split('.')[0]
			grouped[key] = grouped.get(key, 0) + flops
		return grouped
