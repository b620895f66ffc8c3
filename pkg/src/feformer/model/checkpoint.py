"""
Checkpoint files.

Layout: magic b'FEF1', u32 entry count, then per entry a u32-length-prefixed UTF-8 name, u32 ndim and
u32 extents, then the raw little-endian float64 data of every entry in store order. Buffers are stored
after the parameters under a `buffer:` prefix. The model config sits beside the file as `<path>.cfg`
in key=value form.
"""

import logging
import struct
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from feformer.exceptions import CheckpointError, ConfigError
from feformer.keyvalue import format_key_values, parse_key_values
from feformer.model.service import build_model
from feformer.model.views import FEFormer, ModelConfig

logger = logging.getLogger(__name__)

MAGIC = b'FEF1'


def config_path(path: Path) -> Path:
	return path.with_name(path.name + '.cfg')


def model_config_to_text(cfg: ModelConfig) -> str:
	return format_key_values(cfg.model_dump())


def model_config_from_text(text: str, source: str = '<string>') -> ModelConfig:
	values = parse_key_values(text, source)
	unknown = sorted(set(values) - set(ModelConfig.model_fields))
	if unknown:
		raise ConfigError(f'{source}: unknown model config key {unknown[0]!r}')
	try:
		return ModelConfig.model_validate(values)
	except ValidationError as e:
		raise ConfigError(f'{source}: {e.errors()[0]["msg"]}') from e


def write_arrays(path: Path, magic: bytes, arrays: dict[str, np.ndarray], header: bytes = b'') -> None:
	chunks = [magic, header, struct.pack('<I', len(arrays))]
	for name, data in arrays.items():
		encoded = name.encode('utf-8')
		chunks.append(struct.pack('<I', len(encoded)) + encoded)
		chunks.append(struct.pack(f'<I{data.ndim}I', data.ndim, *data.shape))
	for data in arrays.values():
		chunks.append(np.ascontiguousarray(data, dtype='<f8').tobytes())
	path.parent.mkdir(parents=True, exist_ok=True)
	path.write_bytes(b''.join(chunks))


def read_arrays(path: Path, magic: bytes, header_size: int = 0) -> tuple[bytes, dict[str, np.ndarray]]:
	"""Inverse of `write_arrays`; returns the raw fixed-size header and the arrays in file order."""
	if not path.is_file():
		raise CheckpointError(f'checkpoint {path} does not exist')
	raw = path.read_bytes()
	if raw[:4] != magic:
		raise CheckpointError(f'{path}: bad magic {raw[:4]!r}, expected {magic!r}')
	try:
		offset = 4
		header = raw[offset : offset + header_size]
		offset += header_size
		(count,) = struct.unpack_from('<I', raw, offset)
		offset += 4
		table = []
		for _ in range(count):
			(length,) = struct.unpack_from('<I', raw, offset)
			name = raw[offset + 4 : offset + 4 + length].decode('utf-8')
			offset += 4 + length
			(ndim,) = struct.unpack_from('<I', raw, offset)
			shape = struct.unpack_from(f'<{ndim}I', raw, offset + 4)
			offset += 4 + 4 * ndim
			table.append((name, tuple(shape)))
	except (struct.error, UnicodeDecodeError) as e:
		raise CheckpointError(f'{path}: malformed name table ({e})') from e

	expected = offset + 8 * sum(int(np.prod(shape)) for _, shape in table)
	if len(raw) != expected:
		raise CheckpointError(f'{path}: expected {expected} bytes, found {len(raw)}')
	arrays = {}
	for name, shape in table:
		size = int(np.prod(shape))
		arrays[name] = np.frombuffer(raw, dtype='<f8', count=size, offset=offset).reshape(shape).astype(np.float64)
		offset += 8 * size
	return header, arrays


def save_checkpoint(model: FEFormer, path: str | Path) -> Path:
	path = Path(path)
	if model.store.dry:
		raise CheckpointError('a dry (shape-only) model has no values to save')
	write_arrays(path, MAGIC, model.store.state_arrays())
	config_path(path).write_text(model_config_to_text(model.config))
	logger.info(f'saved checkpoint with {len(model.store)} parameters to {path}')
	return path


def load_checkpoint(path: str | Path) -> FEFormer:
	path = Path(path)
	cfg_file = config_path(path)
	if not path.is_file() or not cfg_file.is_file():
		raise CheckpointError(f'checkpoint {path} or its config {cfg_file.name} is missing')
	cfg = model_config_from_text(cfg_file.read_text(), source=str(cfg_file))
	_, arrays = read_arrays(path, MAGIC)
	model = build_model(cfg)
	try:
		model.store.load_arrays(arrays)
	except ConfigError as e:
		raise CheckpointError(f'{path}: {e.message}') from e
	logger.info(f'loaded checkpoint {path}')
	return model
