"""Plain-text `key=value` files: `#` starts a comment, blank lines are ignored, commas separate list items."""

from feformer.exceptions import ConfigError


def parse_value(text: str):
	text = text.strip()
	if text.lower() in ('none', 'null', ''):
		return None
	if ',' in text:
		return [part.strip() for part in text.split(',') if part.strip()]
	return text


def parse_key_values(text: str, source: str = '<string>') -> dict[str, object]:
	values: dict[str, object] = {}
	for number, raw in enumerate(text.splitlines(), start=1):
		line = raw.split('#', 1)[0].strip()
		if not line:
			continue
		if '=' not in line:
			raise ConfigError(f'{source}:{number}: expected key=value, got {raw.strip()!r}')
		key, value = (part.strip() for part in line.split('=', 1))
		if key in values:
			raise ConfigError(f'{source}:{number}: duplicate key {key!r}')
		values[key] = parse_value(value)
	return values


def format_value(value) -> str:
	if value is None:
		return 'none'
	if isinstance(value, bool):
		return 'true' if value else 'false'
	if isinstance(value, float):
		return repr(value)
	if isinstance(value, (list, tuple)):
		return ','.join(format_value(v) for v in value)
	return str(value)


def format_key_values(values: dict[str, object]) -> str:
	return ''.join(f'{key}={format_value(value)}\n' for key, value in values.items())
