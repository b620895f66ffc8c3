"""
Dense tensors with a reverse-mode differentiation tape.

Gradient convention for complex values: for a real loss L and a complex value z = x + iy the
stored gradient is dL/dx + i*dL/dy. With this convention the rule for z = a*b is
grad_a = g*conj(b), and a real input receives the real part of whatever flows into it.
"""

from __future__ import annotations

import contextvars
import logging
from contextlib import contextmanager
from typing import Iterator, Sequence

import numpy as np

from feformer.exceptions import NonFiniteError, ShapeError, TapeError
from feformer.tensor.views import VJP, TapeNode

logger = logging.getLogger(__name__)

_REAL_DTYPE = np.float64
_COMPLEX_DTYPE = np.complex128

_ACTIVE_TAPE: contextvars.ContextVar['Tape | None'] = contextvars.ContextVar('feformer_active_tape', default=None)
_SCOPE: contextvars.ContextVar[str | None] = contextvars.ContextVar('feformer_layer_scope', default=None)


def set_precision(bits: int) -> None:
	"""Switch the dtype of newly created tensors. 64 is the default; 32 needs looser test tolerances."""
	global _REAL_DTYPE, _COMPLEX_DTYPE
	if bits == 64:
		_REAL_DTYPE, _COMPLEX_DTYPE = np.float64, np.complex128
	elif bits == 32:
		_REAL_DTYPE, _COMPLEX_DTYPE = np.float32, np.complex64
	else:
		raise ValueError(f'precision must be 32 or 64 bits, got {bits}')


def real_dtype() -> type:
	return _REAL_DTYPE


@contextmanager
def layer_scope(name: str) -> Iterator[None]:
	"""Name the layer that ops inside the block belong to; used in non-finite diagnostics."""
	parent = _SCOPE.get()
	token = _SCOPE.set(f'{parent}.{name}' if parent else name)
	try:
		yield
	finally:
		_SCOPE.reset(token)


def current_scope() -> str | None:
	return _SCOPE.get()


class Tensor:
	"""Dense real array with shape metadata and an optional gradient slot."""

	def __init__(self, data, requires_grad: bool = False, name: str | None = None):
		array = np.asarray(data)
		if np.iscomplexobj(array):
			array = array.astype(_COMPLEX_DTYPE, copy=False)
		else:
			array = array.astype(_REAL_DTYPE, copy=False)
		self.data: np.ndarray = array
		self.requires_grad = requires_grad
		self.grad: np.ndarray | None = None
		self.name = name
		self._tape: Tape | None = None

	@property
	def shape(self) -> tuple[int, ...]:
		return tuple(self.data.shape)

	@property
	def ndim(self) -> int:
		return self.data.ndim

	@property
	def size(self) -> int:
		return int(self.data.size)

	@property
	def is_complex(self) -> bool:
		return np.iscomplexobj(self.data)

	def numpy(self) -> np.ndarray:
		return self.data

	def item(self) -> float:
		if self.size != 1:
			raise ShapeError(f'item() needs a single value, tensor has shape {self.shape}')
		return self.data.reshape(()).item()

	def detach(self) -> 'Tensor':
		return _wrap(self.data)

	def zero_grad(self) -> None:
		self.grad = None

	def __repr__(self) -> str:
		label = f' name={self.name!r}' if self.name else ''
		return f'{type(self).__name__}(shape={self.shape}{label}, requires_grad={self.requires_grad})'

	def __add__(self, other):
		return add(self, other)

	def __radd__(self, other):
		return add(other, self)

	def __sub__(self, other):
		return sub(self, other)

	def __rsub__(self, other):
		return sub(other, self)

	def __mul__(self, other):
		return mul(self, other)

	def __rmul__(self, other):
		return mul(other, self)

	def __truediv__(self, other):
		return div(self, other)

	def __rtruediv__(self, other):
		return div(other, self)

	def __neg__(self):
		return neg(self)

	def __matmul__(self, other):
		return matmul(self, other)

	def __getitem__(self, index):
		return getitem(self, index)

	def sum(self, axis=None, keepdims: bool = False) -> 'Tensor':
		return sum_(self, axis=axis, keepdims=keepdims)

	def mean(self, axis=None, keepdims: bool = False) -> 'Tensor':
		return mean(self, axis=axis, keepdims=keepdims)

	def reshape(self, *shape) -> 'Tensor':
		if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
			shape = tuple(shape[0])
		return reshape(self, shape)

	def transpose(self, *axes) -> 'Tensor':
		if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
			axes = tuple(axes[0])
		return transpose(self, axes)


class ComplexTensor(Tensor):
	"""Complex spectrum. `real` and `imag` are the two planes; `spatial_shape` is the extent it came from."""

	def __init__(self, data, requires_grad: bool = False, name: str | None = None, spatial_shape=None):
		super().__init__(np.asarray(data).astype(_COMPLEX_DTYPE, copy=False), requires_grad=requires_grad, name=name)
		self.spatial_shape = tuple(spatial_shape) if spatial_shape is not None else self.shape[-3:]

	@property
	def real(self) -> np.ndarray:
		return self.data.real

	@property
	def imag(self) -> np.ndarray:
		return self.data.imag


def _wrap(data: np.ndarray) -> Tensor:
	if np.iscomplexobj(data):
		return ComplexTensor(data)
	return Tensor(data)


def as_tensor(value) -> Tensor:
	if isinstance(value, Tensor):
		return value
	return _wrap(np.asarray(value))


class Tape:
	"""Append-only record of operations, in execution (hence topological) order.

	Usage::

		with Tape() as tape:
			loss = f(x)
		backward(loss, tape)
	"""

	def __init__(self):
		self.nodes: list[TapeNode] = []
		self.consumed = False
		self._token: contextvars.Token | None = None

	def __enter__(self) -> 'Tape':
		if self.consumed:
			raise TapeError('tape was already consumed by backward; record on a fresh tape')
		self._token = _ACTIVE_TAPE.set(self)
		return self

	def __exit__(self, exc_type, exc, tb) -> None:
		if self._token is not None:
			_ACTIVE_TAPE.reset(self._token)
			self._token = None

	def __len__(self) -> int:
		return len(self.nodes)

	def record(self, node: TapeNode) -> None:
		node.output._tape = self
		self.nodes.append(node)


def active_tape() -> Tape | None:
	return _ACTIVE_TAPE.get()


@contextmanager
def no_record() -> Iterator[None]:
	"""Run ops without recording, e.g. inference or finite-difference probes."""
	token = _ACTIVE_TAPE.set(None)
	try:
		yield
	finally:
		_ACTIVE_TAPE.reset(token)


def apply_op(op: str, out_data: np.ndarray, inputs: Sequence[Tensor], vjp: VJP, check_finite: bool = True) -> Tensor:
	"""Wrap `out_data` as a tensor and record the op when any input is differentiable."""
	if check_finite and not np.all(np.isfinite(out_data)):
		scope = current_scope()
		logger.error(f'non-finite values produced by {op} in {scope or "<top level>"}')
		raise NonFiniteError(f'{op} produced non-finite values', layer=scope or op)
	out = _wrap(out_data)
	tape = _ACTIVE_TAPE.get()
	if tape is not None and any(t.requires_grad or t._tape is tape for t in inputs):
		tape.record(TapeNode(op=op, inputs=tuple(inputs), output=out, vjp=vjp, scope=current_scope()))
	return out


def backward(loss: Tensor, tape: Tape) -> None:
	"""Fill `grad` of every differentiable leaf reached from `loss`; the tape is consumed."""
	if tape.consumed:
		raise TapeError('backward was already called on this tape; double backward is not supported')
	if loss.size != 1:
		raise TapeError(f'backward needs a scalar loss, got shape {loss.shape}')
	if loss.is_complex:
		raise TapeError('backward needs a real loss')
	if loss._tape is not tape:
		raise TapeError('loss is detached: it was not produced through this tape')

	grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
	leaf_grads: dict[int, np.ndarray] = {}
	leaves: dict[int, Tensor] = {
		id(t): t for node in tape.nodes for t in node.inputs if t.requires_grad and t._tape is not tape
	}

	for node in reversed(tape.nodes):
		upstream = grads.pop(id(node.output), None)
		if upstream is None:
			continue
		input_grads = node.vjp(upstream)
		for tensor, grad in zip(node.inputs, input_grads):
			if tensor._tape is tape:
				if grad is not None:
					grads[id(tensor)] = grads[id(tensor)] + grad if id(tensor) in grads else grad
			elif tensor.requires_grad:
				leaves[id(tensor)] = tensor
				if grad is None:
					continue
				if not tensor.is_complex and np.iscomplexobj(grad):
					grad = grad.real
				leaf_grads[id(tensor)] = leaf_grads[id(tensor)] + grad if id(tensor) in leaf_grads else grad

	for key, leaf in leaves.items():
		grad = leaf_grads.get(key)
		leaf.grad = np.zeros_like(leaf.data) if grad is None else np.array(grad, dtype=leaf.data.dtype).reshape(leaf.shape)

	tape.consumed = True
	tape.nodes = []
	logger.debug(f'backward filled {len(leaves)} leaf gradients')


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...], real: bool) -> np.ndarray:
	while grad.ndim > len(shape):
		grad = grad.sum(axis=0)
	for axis, extent in enumerate(shape):
		if extent == 1 and grad.shape[axis] != 1:
			grad = grad.sum(axis=axis, keepdims=True)
	if real and np.iscomplexobj(grad):
		grad = grad.real
	return grad


def add(a, b) -> Tensor:
	a, b = as_tensor(a), as_tensor(b)

	def vjp(g):
		return _unbroadcast(g, a.shape, not a.is_complex), _unbroadcast(g, b.shape, not b.is_complex)

	return apply_op('add', a.data + b.data, (a, b), vjp)


def sub(a, b) -> Tensor:
	a, b = as_tensor(a), as_tensor(b)

	def vjp(g):
		return _unbroadcast(g, a.shape, not a.is_complex), _unbroadcast(-g, b.shape, not b.is_complex)

	return apply_op('sub', a.data - b.data, (a, b), vjp)


def mul(a, b) -> Tensor:
	a, b = as_tensor(a), as_tensor(b)
	a_data, b_data = a.data, b.data

	def vjp(g):
		return (
			_unbroadcast(g * np.conj(b_data), a.shape, not a.is_complex),
			_unbroadcast(g * np.conj(a_data), b.shape, not b.is_complex),
		)

	return apply_op('mul', a_data * b_data, (a, b), vjp)


def div(a, b) -> Tensor:
	a, b = as_tensor(a), as_tensor(b)
	if a.is_complex or b.is_complex:
		raise TypeError('div is defined for real tensors only')
	a_data, b_data = a.data, b.data

	def vjp(g):
		return _unbroadcast(g / b_data, a.shape, True), _unbroadcast(-g * a_data / (b_data * b_data), b.shape, True)

	return apply_op('div', a_data / b_data, (a, b), vjp)


def neg(a) -> Tensor:
	a = as_tensor(a)
	return apply_op('neg', -a.data, (a,), lambda g: (-g,))


def exp(a) -> Tensor:
	a = as_tensor(a)
	out = np.exp(a.data)
	return apply_op('exp', out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
	a = as_tensor(a)
	a_data = a.data
	return apply_op('log', np.log(a_data), (a,), lambda g: (g / a_data,))


def square(a) -> Tensor:
	a = as_tensor(a)
	a_data = a.data
	return apply_op('square', a_data * a_data, (a,), lambda g: (2.0 * g * a_data,))


def _normalize_axis(axis, ndim: int) -> tuple[int, ...] | None:
	if axis is None:
		return None
	axes = (axis,) if isinstance(axis, int) else tuple(axis)
	return tuple(sorted(ax % ndim for ax in axes))


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
	a = as_tensor(a)
	axes = _normalize_axis(axis, a.ndim)
	shape = a.shape

	def vjp(g):
		if axes is not None and not keepdims:
			g = np.expand_dims(g, axes)
		return (np.broadcast_to(g, shape),)

	return apply_op('sum', np.sum(a.data, axis=axes, keepdims=keepdims), (a,), vjp)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
	a = as_tensor(a)
	axes = _normalize_axis(axis, a.ndim)
	count = a.size if axes is None else int(np.prod([a.shape[ax] for ax in axes]))
	shape = a.shape

	def vjp(g):
		if axes is not None and not keepdims:
			g = np.expand_dims(g, axes)
		return (np.broadcast_to(g / count, shape),)

	return apply_op('mean', np.mean(a.data, axis=axes, keepdims=keepdims), (a,), vjp)


def amax(a, axis: int, keepdims: bool = False) -> Tensor:
	"""Maximum along one axis; the gradient goes to the first maximal element."""
	a = as_tensor(a)
	axis = axis % a.ndim
	index = np.expand_dims(np.argmax(a.data, axis=axis), axis)
	out = np.take_along_axis(a.data, index, axis=axis)
	shape = a.shape

	def vjp(g):
		if not keepdims:
			g = np.expand_dims(g, axis)
		grad = np.zeros(shape, dtype=g.dtype)
		np.put_along_axis(grad, index, g, axis=axis)
		return (grad,)

	return apply_op('amax', out if keepdims else np.squeeze(out, axis=axis), (a,), vjp)


def reshape(a, shape) -> Tensor:
	a = as_tensor(a)
	original = a.shape
	return apply_op('reshape', a.data.reshape(shape), (a,), lambda g: (g.reshape(original),))


def transpose(a, axes) -> Tensor:
	a = as_tensor(a)
	axes = tuple(axes)
	inverse = tuple(np.argsort(axes))
	return apply_op('transpose', np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),))


def getitem(a, index) -> Tensor:
	"""Basic (slice/int) indexing only, so no element is selected twice."""
	a = as_tensor(a)
	shape, dtype = a.shape, a.data.dtype

	def vjp(g):
		grad = np.zeros(shape, dtype=np.result_type(dtype, g.dtype))
		grad[index] = g
		return (grad,)

	return apply_op('getitem', a.data[index], (a,), vjp)


def concat(tensors: Sequence, axis: int) -> Tensor:
	tensors = [as_tensor(t) for t in tensors]
	sizes = [t.shape[axis] for t in tensors]
	bounds = np.cumsum(sizes)[:-1]

	def vjp(g):
		return tuple(np.split(g, bounds, axis=axis))

	return apply_op('concat', np.concatenate([t.data for t in tensors], axis=axis), tensors, vjp)


def split(a, sections: int, axis: int) -> list[Tensor]:
	a = as_tensor(a)
	extent = a.shape[axis]
	if extent % sections:
		raise ShapeError(f'cannot split extent {extent} into {sections} equal parts')
	step = extent // sections
	parts = []
	for i in range(sections):
		index = [slice(None)] * a.ndim
		index[axis] = slice(i * step, (i + 1) * step)
		parts.append(getitem(a, tuple(index)))
	return parts


def matmul(a, b) -> Tensor:
	a, b = as_tensor(a), as_tensor(b)
	a_data, b_data = a.data, b.data

	def vjp(g):
		grad_a = g @ np.swapaxes(np.conj(b_data), -1, -2)
		grad_b = np.swapaxes(np.conj(a_data), -1, -2) @ g
		return _unbroadcast(grad_a, a.shape, not a.is_complex), _unbroadcast(grad_b, b.shape, not b.is_complex)

	return apply_op('matmul', a_data @ b_data, (a, b), vjp)


def identity(a, op: str = 'identity') -> Tensor:
	a = as_tensor(a)
	return apply_op(op, a.data.copy(), (a,), lambda g: (g,))
