"""
Encoder stem, decoder stem and the cross-scale stem bridge between them.

The bridge splits the coarse stem output X2 in two channel halves. One half goes through a
spectral 1x1x1 block (real and imaginary planes stacked as channels) and back to C channels; the
other is upsampled to the fine stem scale and attends to X1 through a frequency-domain score.
"""

import logging

from feformer.blocks.fdsa import freq_attention_scores
from feformer.blocks.layers import bn, conv, lin, make_batch_norm, make_conv, make_linear
from feformer.blocks.views import ConvBnLayer, FcsbParams, RunMode, StemParams
from feformer.exceptions import ShapeError
from feformer.nn.params import ParamScope
from feformer.nn.service import gelu, relu, softmax_spatial, upsample
from feformer.nn.views import ConvSpec
from feformer.spectral.service import fft3, ifft3, imag_part, make_complex, real_part
from feformer.tensor.service import Tensor, add, concat, getitem, layer_scope, mul, split

logger = logging.getLogger(__name__)


def _conv_bn(scope: ParamScope, name: str, spec: ConvSpec) -> ConvBnLayer:
	sub = scope.scope(name)
	# no conv bias ahead of batch norm; the normalization removes any per-channel offset
	return ConvBnLayer(conv=make_conv(sub, 'conv', spec, bias=False), norm=make_batch_norm(sub, 'bn', spec.out_channels))


def _apply(layer: ConvBnLayer, x: Tensor, mode: RunMode) -> Tensor:
	return gelu(bn(layer.norm, conv(layer.conv, x), mode))


def make_stem(scope: ParamScope, in_channels: int, channels: int, n_classes: int, upsample_mode: str = 'trilinear') -> StemParams:
	if channels % 2:
		raise ShapeError(f'stem width C must be even, got {channels}')
	half = channels // 2
	encoder = []
	for i, (cin, cout) in enumerate(((in_channels, half), (half, channels))):
		layer = scope.scope(f'encoder{i}')
		encoder.append(
			(
				_conv_bn(layer, 'down', ConvSpec(cin, cout, kernel=3, stride=2, padding=1)),
				_conv_bn(layer, 'refine', ConvSpec(cout, cout, kernel=3, stride=1, padding=1)),
			)
		)
	decoder = []
	for i, (cin, cout) in enumerate(((channels, half), (half, half))):
		layer = scope.scope(f'decoder{i}')
		decoder.append(
			(
				_conv_bn(layer, 'project', ConvSpec(cin, cout, kernel=3, stride=1, padding=1)),
				_conv_bn(layer, 'up', ConvSpec(cout, cout, kernel=3, stride=2, padding=1, transposed=True, output_padding=1)),
			)
		)
	head = make_conv(scope, 'head', ConvSpec(half, n_classes, kernel=1))
	return StemParams(encoder=encoder, decoder=decoder, head=head, upsample=upsample_mode)


def make_fcsb(scope: ParamScope, channels: int, upsample_mode: str = 'trilinear') -> FcsbParams:
	half = channels // 2
	return FcsbParams(
		spectral_conv=make_conv(scope, 'spectral_conv', ConvSpec(channels, channels, kernel=1), bias=False),
		spectral_norm=make_batch_norm(scope, 'spectral_bn', channels),
		restore=make_conv(scope, 'restore', ConvSpec(half, channels, kernel=1)),
		q=make_linear(scope, 'q', half, half),
		k=make_linear(scope, 'k', half, half),
		v=make_linear(scope, 'v', half, half),
		upsample=upsample_mode,
	)


def encoder_stem(x: Tensor, p: StemParams, mode: RunMode) -> tuple[Tensor, Tensor]:
	bad = [n for n in x.shape[-3:] if n % 4]
	if bad:
		raise ShapeError(f'stem input extents {x.shape[-3:]} must be divisible by 4')
	outputs = []
	with layer_scope('encoder_stem'):
		for down, refine in p.encoder:
			x = _apply(refine, _apply(down, x, mode), mode)
			outputs.append(x)
	return outputs[0], outputs[1]


def fcsb_forward(x1: Tensor, x2: Tensor, p: FcsbParams, mode: RunMode) -> tuple[Tensor, Tensor]:
	channels = x2.shape[1]
	if channels % 2:
		raise ShapeError(f'bridge needs an even channel count, got {channels}')
	if x1.shape[1] * 2 != channels:
		raise ShapeError(f'bridge inputs disagree: X1 {x1.shape}, X2 {x2.shape}')
	half = channels // 2
	with layer_scope('fcsb'):
		x2_cross = getitem(x2, (slice(None), slice(0, half)))
		x2_spectral = getitem(x2, (slice(None), slice(half, channels)))

		with layer_scope('spectral'):
			spectrum = fft3(x2_spectral)
			stacked = concat([real_part(spectrum), imag_part(spectrum)], axis=1)
			mixed = relu(bn(p.spectral_norm, conv(p.spectral_conv, stacked), mode))
			re, im = split(mixed, 2, axis=1)
			spatial, residue = ifft3(make_complex(re, im), return_residue=True)
			logger.debug(f'spectral path discarded an imaginary part of relative size {residue:.3e}')
			x2_hat = conv(p.restore, spatial)

		with layer_scope('cross'):
			up = upsample(x2_cross, x1.shape[-3:], mode=p.upsample)
			scores = freq_attention_scores(lin(p.q, x1), lin(p.k, x1))
			x1_hat = mul(softmax_spatial(scores), lin(p.v, up))
	return x1_hat, x2_hat


def decoder_stem(x_dec: Tensor, x1_hat: Tensor | None, x2_hat: Tensor | None, p: StemParams, mode: RunMode) -> Tensor:
	"""Bridge outputs are added before the first and second projection layers; None skips the addition."""
	with layer_scope('decoder_stem'):
		x = x_dec
		for (project, up), bridge in zip(p.decoder, (x2_hat, x1_hat)):
			if bridge is not None:
				if bridge.shape != x.shape:
					raise ShapeError(f'bridge output {bridge.shape} does not match decoder stem feature {x.shape}')
				x = add(x, bridge)
			x = _apply(up, _apply(project, x, mode), mode)
		return conv(p.head, x)
