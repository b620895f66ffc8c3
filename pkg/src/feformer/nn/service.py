"""
Differentiable neural primitives on (B, C, D, H, W) feature maps.

Convolutions loop over kernel offsets and contract channels with einsum, so every offset is one
strided view of the padded input. The same loop gives the input gradient as a scatter into a
padded buffer and the transposed convolution as the exact adjoint of the forward one.
"""

import logging
from itertools import product

import numpy as np
from scipy.special import erf, expit

from feformer.exceptions import ShapeError
from feformer.nn.views import Activation, ConvSpec, PoolKind
from feformer.tensor.service import Tensor, amax, apply_op, as_tensor, mean, real_dtype, transpose

logger = logging.getLogger(__name__)

SPATIAL = (2, 3, 4)
_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _offsets(k: int):
	return product(range(k), repeat=3)


def _window(start: tuple[int, int, int], count: tuple[int, int, int], stride: int) -> tuple:
	return (Ellipsis,) + tuple(slice(s, s + stride * (n - 1) + 1, stride) for s, n in zip(start, count))


def _check_input(x: Tensor, spec: ConvSpec) -> None:
	if x.ndim != 5:
		raise ShapeError(f'conv3d expects (B, C, D, H, W), got shape {x.shape}')
	if x.shape[1] != spec.in_channels:
		raise ShapeError(f'conv3d expects {spec.in_channels} input channels, got {x.shape[1]}')
	if any(n <= 0 for n in x.shape):
		raise ShapeError(f'conv3d got non-positive extents {x.shape}')


def conv3d(x, spec: ConvSpec, weight: Tensor, bias: Tensor | None = None) -> Tensor:
	"""Cross-correlation with zero padding, or its adjoint when `spec.transposed` is set.

	Weight layout is (Cout, Cin/groups, k, k, k) for forward and (Cin, Cout/groups, k, k, k) for transposed.
	"""
	x = as_tensor(x)
	_check_input(x, spec)
	if weight.shape != spec.weight_shape:
		raise ShapeError(f'conv weight has shape {weight.shape}, spec needs {spec.weight_shape}')
	out = _conv_transposed(x, spec, weight) if spec.transposed else _conv_forward(x, spec, weight)
	if bias is not None:
		out = _add_channel_bias(out, bias)
	return out


def _conv_forward(x: Tensor, spec: ConvSpec, weight: Tensor) -> Tensor:
	b, _, *extents = x.shape
	g, k, s, p = spec.groups, spec.kernel, spec.stride, spec.padding
	cin_g, cout_g = spec.in_channels // g, spec.out_channels // g
	out_ext = tuple(spec.output_extent(n) for n in extents)
	if any(n <= 0 for n in out_ext):
		raise ShapeError(f'conv output extents {out_ext} are not positive for input {tuple(extents)}')
	padded = np.pad(x.data, ((0, 0), (0, 0)) + ((p, p),) * 3).reshape(b, g, cin_g, *[n + 2 * p for n in extents])
	w = weight.data.reshape(g, cout_g, cin_g, k, k, k)
	depthwise = cin_g == 1 and cout_g == 1

	out = np.zeros((b, g, cout_g) + out_ext, dtype=x.data.dtype)
	for i, j, l in _offsets(k):
		patch = padded[_window((i, j, l), out_ext, s)]
		if depthwise:
			out += patch * w[:, 0, 0, i, j, l].reshape(1, g, 1, 1, 1, 1)
		else:
			out += np.einsum('bgcdhw,goc->bgodhw', patch, w[..., i, j, l], optimize=True)

	def vjp(grad):
		grad = grad.reshape(b, g, cout_g, *out_ext)
		grad_padded = np.zeros_like(padded)
		grad_w = np.zeros_like(w)
		for i, j, l in _offsets(k):
			window = _window((i, j, l), out_ext, s)
			patch = padded[window]
			if depthwise:
				grad_w[:, 0, 0, i, j, l] = np.einsum('bgdhw,bgdhw->g', grad[:, :, 0], patch[:, :, 0])
				grad_padded[window] += grad * w[:, :, :, i, j, l].reshape(1, g, 1, 1, 1, 1)
			else:
				grad_w[..., i, j, l] = np.einsum('bgodhw,bgcdhw->goc', grad, patch, optimize=True)
				grad_padded[window] += np.einsum('bgodhw,goc->bgcdhw', grad, w[..., i, j, l], optimize=True)
		grad_x = grad_padded.reshape(b, g * cin_g, *[n + 2 * p for n in extents])
		crop = (slice(None), slice(None)) + tuple(slice(p, p + n) for n in extents)
		return grad_x[crop], grad_w.reshape(weight.shape)

	return apply_op('conv3d', out.reshape(b, spec.out_channels, *out_ext), (x, weight), vjp)


def _conv_transposed(x: Tensor, spec: ConvSpec, weight: Tensor) -> Tensor:
	b, _, *extents = x.shape
	g, k, s, p = spec.groups, spec.kernel, spec.stride, spec.padding
	cin_g, cout_g = spec.in_channels // g, spec.out_channels // g
	out_ext = tuple(spec.output_extent(n) for n in extents)
	if any(n <= 0 for n in out_ext):
		raise ShapeError(f'transposed conv output extents {out_ext} are not positive for input {tuple(extents)}')
	full_ext = tuple((n - 1) * s + k + spec.output_padding for n in extents)
	data = x.data.reshape(b, g, cin_g, *extents)
	w = weight.data.reshape(g, cin_g, cout_g, k, k, k)
	in_ext = tuple(extents)

	full = np.zeros((b, g, cout_g) + full_ext, dtype=x.data.dtype)
	for i, j, l in _offsets(k):
		full[_window((i, j, l), in_ext, s)] += np.einsum('bgcdhw,gco->bgodhw', data, w[..., i, j, l], optimize=True)
	crop = (Ellipsis,) + tuple(slice(p, p + n) for n in out_ext)
	out = full[crop].reshape(b, spec.out_channels, *out_ext)

	def vjp(grad):
		grad_full = np.zeros((b, g, cout_g) + full_ext, dtype=grad.dtype)
		grad_full[crop] = grad.reshape(b, g, cout_g, *out_ext)
		grad_x = np.zeros_like(data, dtype=grad.dtype)
		grad_w = np.zeros_like(w, dtype=grad.dtype)
		for i, j, l in _offsets(k):
			window = grad_full[_window((i, j, l), in_ext, s)]
			grad_x += np.einsum('bgodhw,gco->bgcdhw', window, w[..., i, j, l], optimize=True)
			grad_w[..., i, j, l] = np.einsum('bgcdhw,bgodhw->gco', data, window, optimize=True)
		return grad_x.reshape(x.shape), grad_w.reshape(weight.shape)

	return apply_op('conv_transpose3d', np.ascontiguousarray(out), (x, weight), vjp)


def _add_channel_bias(x: Tensor, bias: Tensor) -> Tensor:
	shape = (1, -1) + (1,) * (x.ndim - 2)

	def vjp(grad):
		return grad, grad.sum(axis=(0,) + tuple(range(2, grad.ndim)))

	return apply_op('bias', x.data + bias.data.reshape(shape), (x, bias), vjp)


def dynamic_depthwise_conv(x, kernels) -> Tensor:
	"""Depthwise conv where every (batch, channel) pair has its own k^3 kernel, zero padding k//2.

	`kernels` has shape (B, C, k^3) in (d, h, w) raster order.
	"""
	x, kernels = as_tensor(x), as_tensor(kernels)
	b, c, *extents = x.shape
	taps = kernels.shape[-1]
	k = round(taps ** (1 / 3))
	if k**3 != taps or kernels.shape[:2] != (b, c):
		raise ShapeError(f'dynamic kernels {kernels.shape} do not match input {x.shape}')
	p = k // 2
	padded = np.pad(x.data, ((0, 0), (0, 0)) + ((p, p),) * 3)
	kern = kernels.data
	ext = tuple(extents)

	out = np.zeros_like(x.data)
	for t, (i, j, l) in enumerate(_offsets(k)):
		out += padded[_window((i, j, l), ext, 1)] * kern[:, :, t, None, None, None]

	def vjp(grad):
		grad_padded = np.zeros_like(padded)
		grad_k = np.zeros_like(kern)
		for t, (i, j, l) in enumerate(_offsets(k)):
			window = _window((i, j, l), ext, 1)
			grad_k[:, :, t] = np.einsum('bcdhw,bcdhw->bc', grad, padded[window])
			grad_padded[window] += grad * kern[:, :, t, None, None, None]
		crop = (slice(None), slice(None)) + tuple(slice(p, p + n) for n in ext)
		return grad_padded[crop], grad_k

	return apply_op('dynamic_conv3d', out, (x, kernels), vjp)


def linear(x, weight: Tensor, bias: Tensor | None = None) -> Tensor:
	"""x @ W + b over the trailing axis. W has shape (Cin, Cout)."""
	x = as_tensor(x)
	cin, cout = weight.shape
	if x.shape[-1] != cin:
		raise ShapeError(f'linear expects trailing extent {cin}, got shape {x.shape}')
	flat = x.data.reshape(-1, cin)
	w = weight.data
	out = flat @ w
	if bias is not None:
		out = out + bias.data
	lead = x.shape[:-1]

	def vjp(grad):
		grad = grad.reshape(-1, cout)
		grads = [(grad @ w.T).reshape(x.shape), flat.T @ grad]
		if bias is not None:
			grads.append(grad.sum(axis=0))
		return tuple(grads)

	inputs = (x, weight) if bias is None else (x, weight, bias)
	return apply_op('linear', out.reshape(lead + (cout,)), inputs, vjp)


def channels_last(x: Tensor) -> Tensor:
	return transpose(x, (0, 2, 3, 4, 1))


def channels_first(x: Tensor) -> Tensor:
	return transpose(x, (0, 4, 1, 2, 3))


def pointwise_linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
	"""Per-voxel linear map of a (B, C, D, H, W) map; channels trail only inside this call."""
	return channels_first(linear(channels_last(x), weight, bias))


def _normalize(x: np.ndarray, axes: tuple[int, ...], eps: float):
	mu = x.mean(axis=axes, keepdims=True)
	var = x.var(axis=axes, keepdims=True)
	inv_std = 1.0 / np.sqrt(var + eps)
	return (x - mu) * inv_std, inv_std, mu, var


def _normalize_vjp(grad_hat: np.ndarray, x_hat: np.ndarray, inv_std: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
	return inv_std * (
		grad_hat - grad_hat.mean(axis=axes, keepdims=True) - x_hat * (grad_hat * x_hat).mean(axis=axes, keepdims=True)
	)


def layer_norm(x, gamma: Tensor, beta: Tensor, axis: int = 1, eps: float = 1e-6) -> Tensor:
	"""Per-position normalization over one axis (channels) with population variance, then affine."""
	x = as_tensor(x)
	axis = axis % x.ndim
	shape = [1] * x.ndim
	shape[axis] = x.shape[axis]
	gam, bet = gamma.data.reshape(shape), beta.data.reshape(shape)
	x_hat, inv_std, _, _ = _normalize(x.data, (axis,), eps)
	reduce_axes = tuple(a for a in range(x.ndim) if a != axis)

	def vjp(grad):
		grad_x = _normalize_vjp(grad * gam, x_hat, inv_std, (axis,))
		return grad_x, (grad * x_hat).sum(axis=reduce_axes), grad.sum(axis=reduce_axes)

	return apply_op('layer_norm', x_hat * gam + bet, (x, gamma, beta), vjp)


def batch_norm(
	x,
	gamma: Tensor,
	beta: Tensor,
	running_mean: np.ndarray,
	running_var: np.ndarray,
	tracked: np.ndarray,
	training: bool,
	momentum: float = 0.1,
	eps: float = 1e-5,
) -> Tensor:
	"""Per-channel normalization of (B, C, ...). Training mode updates the running buffers in place."""
	x = as_tensor(x)
	axes = (0,) + tuple(range(2, x.ndim))
	shape = (1, -1) + (1,) * (x.ndim - 2)
	gam, bet = gamma.data.reshape(shape), beta.data.reshape(shape)

	if training:
		count = x.size // x.shape[1]
		if count < 2:
			raise ShapeError(f'batch norm in training mode needs at least 2 values per channel, got {count}')
		x_hat, inv_std, mu, var = _normalize(x.data, axes, eps)
		running_mean *= 1.0 - momentum
		running_mean += momentum * mu.reshape(-1)
		running_var *= 1.0 - momentum
		running_var += momentum * var.reshape(-1) * count / (count - 1)
		tracked += 1

		def vjp(grad):
			grad_x = _normalize_vjp(grad * gam, x_hat, inv_std, axes)
			return grad_x, (grad * x_hat).sum(axis=axes), grad.sum(axis=axes)

		return apply_op('batch_norm', x_hat * gam + bet, (x, gamma, beta), vjp)

	if int(tracked.reshape(-1)[0]) == 0:
		raise ShapeError('batch norm in eval mode needs populated running statistics')
	inv_std = (1.0 / np.sqrt(running_var + eps)).reshape(shape)
	x_hat = (x.data - running_mean.reshape(shape)) * inv_std

	def eval_vjp(grad):
		return grad * gam * inv_std, (grad * x_hat).sum(axis=axes), grad.sum(axis=axes)

	return apply_op('batch_norm', x_hat * gam + bet, (x, gamma, beta), eval_vjp)


def gelu(x) -> Tensor:
	x = as_tensor(x)
	data = x.data
	cdf = 0.5 * (1.0 + erf(data * _INV_SQRT2))
	pdf = np.exp(-0.5 * data * data) * _INV_SQRT2PI
	return apply_op('gelu', data * cdf, (x,), lambda g: (g * (cdf + data * pdf),))


def relu(x) -> Tensor:
	x = as_tensor(x)
	mask = x.data > 0
	return apply_op('relu', np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def relu6(x) -> Tensor:
	x = as_tensor(x)
	mask = (x.data > 0) & (x.data < 6)
	return apply_op('relu6', np.clip(x.data, 0.0, 6.0), (x,), lambda g: (g * mask,))


def sigmoid(x) -> Tensor:
	x = as_tensor(x)
	out = expit(x.data)
	return apply_op('sigmoid', out, (x,), lambda g: (g * out * (1.0 - out),))


_ACTIVATIONS = {
	Activation.GELU: gelu,
	Activation.RELU: relu,
	Activation.RELU6: relu6,
	Activation.SIGMOID: sigmoid,
}


def activation(kind: Activation | str, x) -> Tensor:
	return _ACTIVATIONS[Activation(kind)](x)


def softmax(x, axis=-1) -> Tensor:
	"""Softmax over one axis or a tuple of axes, with max subtraction."""
	x = as_tensor(x)
	axes = (axis,) if isinstance(axis, int) else tuple(axis)
	shifted = x.data - x.data.max(axis=axes, keepdims=True)
	e = np.exp(shifted)
	out = e / e.sum(axis=axes, keepdims=True)

	def vjp(g):
		return (out * (g - (g * out).sum(axis=axes, keepdims=True)),)

	return apply_op('softmax', out, (x,), vjp)


def log_softmax(x, axis: int = 1) -> Tensor:
	x = as_tensor(x)
	shifted = x.data - x.data.max(axis=axis, keepdims=True)
	log_norm = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
	out = shifted - log_norm
	probs = np.exp(out)

	def vjp(g):
		return (g - probs * g.sum(axis=axis, keepdims=True),)

	return apply_op('log_softmax', out, (x,), vjp)


def softmax_spatial(x) -> Tensor:
	"""Softmax over the flattened D*H*W positions, independently per (batch, channel)."""
	return softmax(x, axis=(-3, -2, -1))


def pool(kind: PoolKind | str, x) -> Tensor:
	kind = PoolKind(kind)
	x = as_tensor(x)
	if kind is PoolKind.GLOBAL_AVG_SPATIAL:
		return mean(x, axis=SPATIAL, keepdims=True)
	if kind is PoolKind.AVG_OVER_CHANNELS:
		return mean(x, axis=1, keepdims=True)
	return amax(x, axis=1, keepdims=True)


def _interpolation_matrix(n_in: int, n_out: int, mode: str) -> np.ndarray:
	matrix = np.zeros((n_out, n_in), dtype=real_dtype())
	scale = n_in / n_out
	for o in range(n_out):
		if mode == 'nearest':
			matrix[o, min(int(np.floor(o * scale)), n_in - 1)] = 1.0
			continue
		src = max((o + 0.5) * scale - 0.5, 0.0)
		lo = min(int(np.floor(src)), n_in - 1)
		hi = min(lo + 1, n_in - 1)
		frac = src - lo
		matrix[o, lo] += 1.0 - frac
		matrix[o, hi] += frac
	return matrix


def upsample(x, size: tuple[int, int, int], mode: str = 'trilinear') -> Tensor:
	"""Resize the spatial axes, half-pixel centers without corner alignment, clamped at the borders."""
	if mode not in ('trilinear', 'nearest'):
		raise ValueError(f'unknown upsample mode {mode!r}')
	x = as_tensor(x)
	matrices = [_interpolation_matrix(n_in, n_out, mode) for n_in, n_out in zip(x.shape[-3:], size)]
	out = x.data
	for axis, matrix in zip(SPATIAL, matrices):
		out = np.moveaxis(np.tensordot(matrix, out, axes=([1], [axis])), 0, axis)

	def vjp(g):
		for axis, matrix in zip(SPATIAL, matrices):
			g = np.moveaxis(np.tensordot(matrix.T, g, axes=([1], [axis])), 0, axis)
		return (g,)

	return apply_op(f'upsample_{mode}', np.ascontiguousarray(out), (x,), vjp)


def dropout(x, rate: float, rng: np.random.Generator | None = None, training: bool = True) -> Tensor:
	"""Inverted dropout. At rate 0 or outside training it records an identity op."""
	x = as_tensor(x)
	if rate <= 0.0 or not training:
		return apply_op('dropout', x.data, (x,), lambda g: (g,), check_finite=False)
	if rate >= 1.0:
		raise ValueError(f'dropout rate must be below 1, got {rate}')
	if rng is None:
		raise ValueError('training-mode dropout needs a seeded generator')
	mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
	return apply_op('dropout', x.data * mask, (x,), lambda g: (g * mask,))
