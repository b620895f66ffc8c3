"""
Volume files: a plain-text header block, then the raw little-endian payload.

    VOL1
    dtype=f64
    extents=32,32,32
    spacing=1.0,1.0,1.0
    channels=1
    <blank line>
    <channels*D*H*W values, C order>
"""

import logging
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from feformer.exceptions import ConfigError, VolumeFormatError
from feformer.keyvalue import format_key_values, parse_key_values
from feformer.volume_io.views import MAGIC, VolumeHeader

logger = logging.getLogger(__name__)

_TERMINATOR = b'\n\n'


def header_for(data: np.ndarray, spacing=(1.0, 1.0, 1.0), dtype: str | None = None) -> VolumeHeader:
	"""Header matching `data` shaped (D, H, W) or (C, D, H, W); integer data defaults to u8 labels."""
	if data.ndim not in (3, 4):
		raise VolumeFormatError(f'volumes are (D, H, W) or (C, D, H, W), got shape {data.shape}')
	if dtype is None:
		dtype = 'u8' if np.issubdtype(data.dtype, np.integer) or data.dtype == bool else 'f64'
	channels = 1 if data.ndim == 3 else data.shape[0]
	spacing = tuple(float(s) for s in np.broadcast_to(np.asarray(spacing, dtype=np.float64), (3,)))
	try:
		return VolumeHeader(dtype=dtype, extents=data.shape[-3:], spacing=spacing, channels=channels)
	except ValidationError as e:
		raise VolumeFormatError(f'invalid volume header: {e.errors()[0]["msg"]}') from e


def _encode_header(header: VolumeHeader) -> bytes:
	fields = header.model_dump(exclude={'magic'})
	return (header.magic + '\n' + format_key_values(fields)).encode('ascii') + b'\n'


def _payload(header: VolumeHeader, data: np.ndarray) -> bytes:
	if data.size != int(np.prod(header.shape)):
		raise VolumeFormatError(f'header describes {int(np.prod(header.shape))} values {header.shape}, data has {data.size} {data.shape}')
	if header.dtype == 'u8':
		if not (np.issubdtype(data.dtype, np.integer) or data.dtype == bool):
			raise VolumeFormatError(f'u8 volumes hold integer labels, got {data.dtype} data')
		if data.size and (data.min() < 0 or data.max() > 255):
			raise VolumeFormatError(f'label values {data.min()}..{data.max()} do not fit in u8')
	elif not np.issubdtype(data.dtype, np.floating):
		raise VolumeFormatError(f'{header.dtype} volumes hold floating values, got {data.dtype} data')
	return np.ascontiguousarray(data, dtype=header.numpy_dtype).tobytes()


def write_volume(path: str | Path, header: VolumeHeader, data: np.ndarray) -> Path:
	path = Path(path)
	payload = _payload(header, data)
	path.parent.mkdir(parents=True, exist_ok=True)
	path.write_bytes(_encode_header(header) + payload)
	logger.debug(f'wrote {header.dtype} volume {header.shape} to {path}')
	return path


def _decode_header(block: bytes, source: str) -> VolumeHeader:
	try:
		text = block.decode('ascii')
	except UnicodeDecodeError as e:
		raise VolumeFormatError(f'{source}: header is not ASCII text') from e
	first, _, rest = text.partition('\n')
	if first.strip() != MAGIC:
		raise VolumeFormatError(f'{source}: bad magic {first.strip()[:8]!r}, expected {MAGIC!r}')
	try:
		values = parse_key_values(rest, source)
		return VolumeHeader.model_validate(values)
	except ConfigError as e:
		raise VolumeFormatError(e.message) from e
	except ValidationError as e:
		first_error = e.errors()[0]
		location = '.'.join(str(part) for part in first_error['loc'])
		raise VolumeFormatError(f'{source}: invalid header field {location!r}: {first_error["msg"]}') from e


def read_volume(path: str | Path) -> tuple[VolumeHeader, np.ndarray]:
	"""Header and data shaped (C, D, H, W) in the stored dtype."""
	path = Path(path)
	if not path.is_file():
		raise VolumeFormatError(f'volume {path} does not exist')
	raw = path.read_bytes()
	if not raw.startswith(MAGIC.encode('ascii')):
		raise VolumeFormatError(f'{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}')
	end = raw.find(_TERMINATOR)
	if end < 0:
		raise VolumeFormatError(f'{path}: header is not terminated by a blank line')
	header = _decode_header(raw[:end], str(path))
	payload = raw[end + len(_TERMINATOR) :]
	if len(payload) != header.payload_bytes:
		raise VolumeFormatError(f'{path}: expected {header.payload_bytes} payload bytes, found {len(payload)}')
	data = np.frombuffer(payload, dtype=header.numpy_dtype).reshape(header.shape).copy()
	return header, data
