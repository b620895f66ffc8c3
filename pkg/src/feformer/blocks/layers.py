"""Parameter factories and thin appliers shared by the blocks."""

from feformer.blocks.views import BatchNormParams, ConvParams, LinearParams, NormParams, RunMode
from feformer.nn.params import ParamScope
from feformer.nn.service import batch_norm, conv3d, layer_norm, pointwise_linear
from feformer.nn.views import ConvSpec
from feformer.tensor.service import Tensor


def make_conv(scope: ParamScope, name: str, spec: ConvSpec, bias: bool = True) -> ConvParams:
	sub = scope.scope(name)
	fan_in = spec.fan_in if not spec.transposed else (spec.out_channels // spec.groups) * spec.kernel**3
	weight = sub.param('weight', spec.weight_shape, 'kaiming_normal', fan_in=fan_in)
	return ConvParams(spec=spec, weight=weight, bias=sub.param('bias', (spec.out_channels,), 'zeros') if bias else None)


def make_linear(scope: ParamScope, name: str, cin: int, cout: int, bias: bool = True) -> LinearParams:
	sub = scope.scope(name)
	weight = sub.param('weight', (cin, cout), 'trunc_normal')
	return LinearParams(weight=weight, bias=sub.param('bias', (cout,), 'zeros') if bias else None)


def make_layer_norm(scope: ParamScope, name: str, channels: int) -> NormParams:
	sub = scope.scope(name)
	return NormParams(gamma=sub.param('gamma', (channels,), 'ones'), beta=sub.param('beta', (channels,), 'zeros'))


def make_batch_norm(scope: ParamScope, name: str, channels: int) -> BatchNormParams:
	sub = scope.scope(name)
	return BatchNormParams(
		gamma=sub.param('gamma', (channels,), 'ones'),
		beta=sub.param('beta', (channels,), 'zeros'),
		running_mean=sub.buffer('running_mean', (channels,), 0.0),
		running_var=sub.buffer('running_var', (channels,), 1.0),
		tracked=sub.buffer('tracked', (1,), 0.0),
	)


def conv(p: ConvParams, x: Tensor) -> Tensor:
	return conv3d(x, p.spec, p.weight, p.bias)


def lin(p: LinearParams, x: Tensor) -> Tensor:
	"""Per-voxel linear map on a (B, C, D, H, W) feature map."""
	return pointwise_linear(x, p.weight, p.bias)


def norm(p: NormParams, x: Tensor) -> Tensor:
	return layer_norm(x, p.gamma, p.beta, axis=1)


def bn(p: BatchNormParams, x: Tensor, mode: RunMode) -> Tensor:
	return batch_norm(x, p.gamma, p.beta, p.running_mean, p.running_var, p.tracked, training=mode.training)
