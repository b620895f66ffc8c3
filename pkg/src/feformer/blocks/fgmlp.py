"""
Frequency-decomposed gating MLP.

expand x4 -> GELU -> gate -> compress, then split the result with an input-adaptive low-pass
kernel into low and high parts and recombine them with two learned spatial maps.
"""

import logging

from feformer.blocks.layers import conv, lin, make_conv, make_linear
from feformer.blocks.views import FgmlpParams, RunMode
from feformer.exceptions import ConfigError, ShapeError
from feformer.nn.params import ParamScope
from feformer.nn.service import activation, dropout, dynamic_depthwise_conv, gelu, pool, sigmoid, softmax
from feformer.nn.views import ConvSpec, PoolKind
from feformer.tensor.service import Tensor, add, concat, getitem, layer_scope, mul, reshape, sub

logger = logging.getLogger(__name__)

MLP_KINDS = ('fgmlp', 'gated', 'standard')


def make_fgmlp(
	scope: ParamScope,
	channels: int,
	kind: str = 'fgmlp',
	ratio: int = 4,
	k: int = 3,
	dropout_rate: float = 0.0,
	gate: str = 'relu6',
	kernel_generator: str = 'grouped',
) -> FgmlpParams:
	if kind not in MLP_KINDS:
		raise ConfigError(f'unknown mlp kind {kind!r}; expected one of {MLP_KINDS}')
	if k % 2 == 0:
		raise ConfigError(f'low-pass kernel extent must be odd, got {k}')
	hidden = ratio * channels
	params = FgmlpParams(
		lin1=make_linear(scope, 'lin1', channels, hidden),
		lin2=make_linear(scope, 'lin2', hidden, channels),
		kernel_gen1=None,
		kernel_gen2=None,
		modulator=None,
		k=k,
		dropout=dropout_rate,
		gate=None if kind == 'standard' else gate,
	)
	if kind == 'fgmlp':
		if channels % 4:
			raise ShapeError(f'kernel generator needs C divisible by 4, got C={channels}')
		reduced = channels // 4
		groups = reduced if kernel_generator == 'grouped' else 1
		params.kernel_gen1 = make_conv(scope, 'kernel_gen1', ConvSpec(channels, reduced, kernel=1))
		params.kernel_gen2 = make_conv(scope, 'kernel_gen2', ConvSpec(reduced, channels * k**3, kernel=1, groups=groups))
		params.modulator = make_conv(scope, 'modulator', ConvSpec(2, 2, kernel=7, groups=2))
	return params


def dynamic_lowpass_kernels(x_out: Tensor, p: FgmlpParams) -> Tensor:
	"""(B, C, k^3) smoothing kernels, each a probability vector."""
	b, c = x_out.shape[:2]
	if c % 4:
		raise ShapeError(f'kernel generator needs C divisible by 4, got C={c}')
	pooled = pool(PoolKind.GLOBAL_AVG_SPATIAL, x_out)
	logits = conv(p.kernel_gen2, gelu(conv(p.kernel_gen1, pooled)))
	return softmax(reshape(logits, (b, c, p.k**3)), axis=-1)


def frequency_select_modulate(x_out: Tensor, kernels: Tensor, p: FgmlpParams) -> Tensor:
	x_low = dynamic_depthwise_conv(x_out, kernels)
	x_high = sub(x_out, x_low)
	merged = add(x_low, x_high)
	descriptor = concat([pool(PoolKind.AVG_OVER_CHANNELS, merged), pool(PoolKind.MAX_OVER_CHANNELS, merged)], axis=1)
	weights = sigmoid(conv(p.modulator, descriptor))
	w_low, w_high = getitem(weights, (slice(None), slice(0, 1))), getitem(weights, (slice(None), slice(1, 2)))
	return add(mul(w_low, x_low), mul(w_high, x_high))


def fgmlp_forward(x_in: Tensor, p: FgmlpParams, mode: RunMode | None = None) -> Tensor:
	mode = mode or RunMode(training=False)
	if x_in.ndim != 5 or x_in.shape[1] != p.lin1.weight.shape[0]:
		raise ShapeError(f'MLP with C={p.lin1.weight.shape[0]} got input of shape {x_in.shape}')
	with layer_scope('mlp'):
		x = gelu(lin(p.lin1, x_in))
		if p.gate is not None:
			x = mul(x, activation(p.gate, x))
		x = dropout(x, p.dropout, mode.rng, training=mode.training)
		x_out = dropout(lin(p.lin2, x), p.dropout, mode.rng, training=mode.training)
		if p.kernel_gen1 is None:
			return x_out
		return frequency_select_modulate(x_out, dynamic_lowpass_kernels(x_out, p), p)
