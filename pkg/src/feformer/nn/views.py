from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from feformer.exceptions import ShapeError


class Activation(str, Enum):
	GELU = 'gelu'
	RELU = 'relu'
	RELU6 = 'relu6'
	SIGMOID = 'sigmoid'


class PoolKind(str, Enum):
	GLOBAL_AVG_SPATIAL = 'global_avg_spatial'
	AVG_OVER_CHANNELS = 'avg_over_channels'
	MAX_OVER_CHANNELS = 'max_over_channels'


@dataclass(frozen=True)
class ConvSpec:
	in_channels: int
	out_channels: int
	kernel: int = 3
	stride: int = 1
	padding: int | None = None
	groups: int = 1
	transposed: bool = False
	output_padding: int = 0

	def __post_init__(self):
		if self.in_channels <= 0 or self.out_channels <= 0:
			raise ShapeError(f'conv channels must be positive, got {self.in_channels}->{self.out_channels}')
		if self.groups <= 0 or self.in_channels % self.groups or self.out_channels % self.groups:
			raise ShapeError(f'channels {self.in_channels}->{self.out_channels} are not divisible by groups={self.groups}')
		if self.kernel <= 0 or self.stride <= 0:
			raise ShapeError(f'kernel and stride must be positive, got kernel={self.kernel} stride={self.stride}')
		if self.padding is None:
			object.__setattr__(self, 'padding', self.kernel // 2)

	@property
	def depthwise(self) -> bool:
		return self.groups == self.in_channels == self.out_channels

	@property
	def weight_shape(self) -> tuple[int, ...]:
		k = self.kernel
		if self.transposed:
			return (self.in_channels, self.out_channels // self.groups, k, k, k)
		return (self.out_channels, self.in_channels // self.groups, k, k, k)

	@property
	def fan_in(self) -> int:
		return (self.in_channels // self.groups) * self.kernel**3

	def output_extent(self, n: int) -> int:
		k, s, p = self.kernel, self.stride, self.padding
		if self.transposed:
			return (n - 1) * s - 2 * p + k + self.output_padding
		return (n + 2 * p - k) // s + 1
