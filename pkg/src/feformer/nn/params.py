from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from feformer.exceptions import ConfigError
from feformer.nn import init
from feformer.tensor.service import Tensor

logger = logging.getLogger(__name__)


class ParamStore:
	"""Named, ordered learnable tensors plus non-learnable buffers.

	Parameters are initialized from one seeded generator in creation order, so two stores built the same
	way with the same seed are bitwise identical. A dry store records shapes only: its tensors are
	read-only broadcast views of a single zero and allocate nothing.
	"""

	def __init__(self, seed: int = 0, dry: bool = False):
		self.seed = seed
		self.dry = dry
		self.rng = np.random.default_rng(seed)
		self.params: dict[str, Tensor] = {}
		self.provenance: dict[str, str] = {}
		self.buffers: dict[str, np.ndarray] = {}

	def __len__(self) -> int:
		return len(self.params)

	def __contains__(self, name: str) -> bool:
		return name in self.params

	def __getitem__(self, name: str) -> Tensor:
		return self.params[name]

	def scope(self, prefix: str) -> 'ParamScope':
		return ParamScope(self, prefix)

	def _placeholder(self, shape: tuple[int, ...]) -> np.ndarray:
		return np.broadcast_to(np.zeros((), dtype=np.float64), shape)

	def param(self, name: str, shape: tuple[int, ...], initializer: str, fan_in: int | None = None, std: float = 0.02) -> Tensor:
		if name in self.params:
			raise ConfigError(f'parameter {name!r} defined twice')
		shape = tuple(int(n) for n in shape)
		if self.dry:
			data = self._placeholder(shape)
		elif initializer == 'trunc_normal':
			data = init.trunc_normal(shape, self.rng, std=std)
		elif initializer == 'kaiming_normal':
			data = init.kaiming_normal(shape, fan_in or 1, self.rng)
		elif initializer == 'zeros':
			data = init.zeros(shape)
		elif initializer == 'ones':
			data = init.ones(shape)
		else:
			raise ConfigError(f'unknown initializer {initializer!r}; expected one of {init.INITIALIZERS}')
		tensor = Tensor(data, requires_grad=True, name=name)
		self.params[name] = tensor
		self.provenance[name] = initializer
		return tensor

	def buffer(self, name: str, shape: tuple[int, ...], fill: float = 0.0, dtype=np.float64) -> np.ndarray:
		if name in self.buffers:
			raise ConfigError(f'buffer {name!r} defined twice')
		data = self._placeholder(tuple(shape)) if self.dry else np.full(shape, fill, dtype=dtype)
		self.buffers[name] = data
		return data

	def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
		return iter(self.params.items())

	def num_learnable(self) -> int:
		return sum(int(np.prod(t.shape)) for t in self.params.values())

	def zero_grad(self) -> None:
		for tensor in self.params.values():
			tensor.grad = None

	def state_arrays(self) -> dict[str, np.ndarray]:
		"""Parameters then buffers, in store order."""
		arrays = {name: t.data for name, t in self.params.items()}
		arrays.update({f'buffer:{name}': data for name, data in self.buffers.items()})
		return arrays

	def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
		expected = list(self.state_arrays())
		if list(arrays) != expected:
			missing = sorted(set(expected) - set(arrays))
			extra = sorted(set(arrays) - set(expected))
			raise ConfigError(f'stored names do not match the model (missing {missing[:5]}, unexpected {extra[:5]})')
		for name, data in arrays.items():
			if name.startswith('buffer:'):
				target = self.buffers[name.removeprefix('buffer:')]
			else:
				target = self.params[name].data
			if target.shape != data.shape:
				raise ConfigError(f'{name}: stored shape {data.shape} differs from model shape {target.shape}')
			target[...] = data


@dataclass
class ParamScope:
	"""A name prefix on a store; `scope.param('w', ...)` creates `<prefix>.w`."""

	store: ParamStore
	prefix: str

	def _name(self, name: str) -> str:
		return f'{self.prefix}.{name}' if self.prefix else name

	def scope(self, name: str) -> 'ParamScope':
		return ParamScope(self.store, self._name(name))

	def param(self, name: str, shape: tuple[int, ...], initializer: str, fan_in: int | None = None, std: float = 0.02) -> Tensor:
		return self.store.param(self._name(name), shape, initializer, fan_in=fan_in, std=std)

	def buffer(self, name: str, shape: tuple[int, ...], fill: float = 0.0, dtype=np.float64) -> np.ndarray:
		return self.store.buffer(self._name(name), shape, fill=fill, dtype=dtype)
