"""
Run configuration: a plain-text `key=value` file mirroring ModelConfig (under `model.`) plus
harness knobs. Unknown keys are rejected and every key has a default.
"""

import logging
import os
from pathlib import Path
from typing import Literal

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from feformer.exceptions import ConfigError
from feformer.keyvalue import parse_key_values
from feformer.model.views import ModelConfig

load_dotenv()

logger = logging.getLogger(__name__)

LR_PRESETS: dict[str, tuple[float, float]] = {
	'organs': (1e-3, 3e-5),
	'brain': (5e-5, 3e-6),
}


class RunConfig(BaseModel):
	model_config = ConfigDict(extra='forbid', validate_assignment=True)

	model: ModelConfig = Field(default_factory=ModelConfig)
	steps: int = Field(default=300, ge=0)
	batch: int = Field(default=2, ge=1)
	n_phantoms: int = Field(default=4, ge=1)
	extent: int = Field(default=32, ge=32)
	crop: int | None = None
	phantom_seed: int = 0
	train_seed: int = 0
	lr_preset: Literal['organs', 'brain'] = 'organs'
	lr0: float | None = Field(default=None, gt=0)
	lr_min: float | None = Field(default=None, ge=0)
	power: float = Field(default=0.9, gt=0)
	weight_decay: float = Field(default=0.01, ge=0)
	eval_every: int = Field(default=50, ge=1)
	augment: bool = True
	normalize: bool = False
	spacing: float = Field(default=1.0, gt=0)
	output_dir: str = 'runs/toy'
	history_file: str = 'history.tsv'
	checkpoint_file: str = 'model.fef'

	def learning_rates(self) -> tuple[float, float]:
		lr0, lr_min = LR_PRESETS[self.lr_preset]
		return (self.lr0 if self.lr0 is not None else lr0, self.lr_min if self.lr_min is not None else lr_min)

	@property
	def history_path(self) -> Path:
		return Path(self.output_dir) / self.history_file

	@property
	def checkpoint_path(self) -> Path:
		return Path(self.output_dir) / self.checkpoint_file


def num_threads() -> int:
	"""Augmentation prefetch workers, from FEFORMER_NUM_THREADS."""
	return max(int(os.getenv('FEFORMER_NUM_THREADS', '1')), 1)


def validation_message(error: ValidationError) -> str:
	first = error.errors()[0]
	location = '.'.join(str(part) for part in first['loc'])
	return f'invalid value for {location!r}: {first["msg"]}'


def _nest(flat: dict[str, object]) -> dict[str, object]:
	nested: dict[str, object] = {}
	for key, value in flat.items():
		if key.startswith('model.') and key.removeprefix('model.') in ModelConfig.model_fields:
			nested.setdefault('model', {})[key.removeprefix('model.')] = value
		elif key in RunConfig.model_fields and key != 'model':
			nested[key] = value
		else:
			raise ConfigError(f'unknown config key {key!r}')
	return nested


def run_config_from_text(text: str, source: str = '<string>') -> RunConfig:
	try:
		return RunConfig.model_validate(_nest(parse_key_values(text, source)))
	except ValidationError as e:
		raise ConfigError(f'{source}: {validation_message(e)}') from e


def load_run_config(path: str | Path) -> RunConfig:
	path = Path(path)
	if not path.is_file():
		raise ConfigError(f'config file {path} does not exist')
	config = run_config_from_text(path.read_text(), source=str(path))
	logger.info(f'loaded run config from {path}')
	return config
