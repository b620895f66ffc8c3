class FEFormerError(Exception):
	"""Base error. `exit_code` is what the command line returns when the error reaches it."""

	exit_code: int = 1

	def __init__(self, message: str, exit_code: int | None = None):
		if exit_code is not None:
			self.exit_code = exit_code
		self.message = message
		super().__init__(f'Error {self.exit_code}: {message}')


class ShapeError(FEFormerError):
	exit_code = 2


class SpectralError(FEFormerError):
	pass


class TapeError(FEFormerError):
	pass


class NonFiniteError(FEFormerError):
	def __init__(self, message: str, layer: str | None = None):
		self.layer = layer
		super().__init__(f'{message} (first non-finite layer: {layer})' if layer else message)


class ConfigError(FEFormerError):
	exit_code = 2


class VolumeFormatError(FEFormerError):
	exit_code = 2


class CheckpointError(FEFormerError):
	exit_code = 2


class LabelError(FEFormerError):
	exit_code = 2
