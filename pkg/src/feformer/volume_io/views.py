from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

MAGIC = 'VOL1'

VolumeDtype = Literal['f32', 'f64', 'u8']

NUMPY_DTYPES: dict[str, str] = {
	'f32': '<f4',
	'f64': '<f8',
	'u8': 'u1',
}


class VolumeHeader(BaseModel):
	"""Plain-text header of a volume file; `u8` is reserved for label volumes."""

	model_config = ConfigDict(extra='forbid', frozen=True)

	magic: Literal['VOL1'] = MAGIC
	dtype: VolumeDtype = 'f64'
	extents: tuple[int, int, int]
	spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
	channels: int = Field(default=1, ge=1)

	@field_validator('extents')
	@classmethod
	def _positive_extents(cls, value: tuple[int, int, int]) -> tuple[int, int, int]:
		if any(n <= 0 for n in value):
			raise ValueError(f'extents must be positive, got {value}')
		return value

	@field_validator('spacing')
	@classmethod
	def _positive_spacing(cls, value: tuple[float, float, float]) -> tuple[float, float, float]:
		if any(not s > 0 for s in value):
			raise ValueError(f'spacing must be positive, got {value}')
		return value

	@property
	def shape(self) -> tuple[int, int, int, int]:
		return (self.channels, *self.extents)

	@property
	def numpy_dtype(self) -> np.dtype:
		return np.dtype(NUMPY_DTYPES[self.dtype])

	@property
	def payload_bytes(self) -> int:
		return int(np.prod(self.shape)) * self.numpy_dtype.itemsize
