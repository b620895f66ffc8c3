"""
Frequency-enhanced dynamic self-attention.

The attention score is the spectral product of Q and K, i.e. their circular convolution over the
spatial axes, normalized by a spatial softmax and applied to V elementwise. A channel gate built
from band-wise spectral magnitudes recalibrates the result. There is no output projection.
"""

import logging

from feformer.blocks.layers import conv, lin, make_conv, make_linear
from feformer.blocks.views import FdsaParams
from feformer.exceptions import ShapeError
from feformer.nn.params import ParamScope
from feformer.nn.service import linear, relu, sigmoid, softmax_spatial
from feformer.nn.views import ConvSpec
from feformer.spectral.service import band_magnitude_means, band_masks, fft3, ifft3
from feformer.tensor.service import Tensor, layer_scope, mul, reshape

logger = logging.getLogger(__name__)

RESIDUE_TOL = 1e-8


def make_fdsa(scope: ParamScope, channels: int, cutoffs: tuple[float, float], recalibrate: bool = True) -> FdsaParams:
	if recalibrate and (3 * channels) % 4:
		raise ShapeError(f'3C must be divisible by 4 for the recalibration FCs, got C={channels}')
	hidden = 3 * channels // 4
	return FdsaParams(
		dw7=make_conv(scope, 'dw7', ConvSpec(channels, channels, kernel=7, groups=channels)),
		q=make_linear(scope, 'q', channels, channels),
		k=make_linear(scope, 'k', channels, channels),
		v=make_linear(scope, 'v', channels, channels),
		fc1=make_linear(scope, 'fc1', 3 * channels, hidden) if recalibrate else None,
		fc2=make_linear(scope, 'fc2', hidden, channels) if recalibrate else None,
		cutoffs=cutoffs,
	)


def freq_attention_scores(q: Tensor, k: Tensor, tol: float = RESIDUE_TOL) -> Tensor:
	"""ifft3(fft3(Q) * fft3(K)), real. A relative imaginary residue above `tol` raises SpectralError."""
	if q.shape != k.shape:
		raise ShapeError(f'Q and K shapes differ: {q.shape} vs {k.shape}')
	return ifft3(mul(fft3(q), fft3(k)), tol=tol)


def multi_freq_recalibrate(x: Tensor, p: FdsaParams) -> Tensor:
	b, c = x.shape[:2]
	masks = band_masks(x.shape[-3:], p.cutoffs)
	descriptor = band_magnitude_means(x, masks)
	weights = sigmoid(linear(relu(linear(descriptor, p.fc1.weight, p.fc1.bias)), p.fc2.weight, p.fc2.bias))
	return mul(x, reshape(weights, (b, c, 1, 1, 1)))


def fdsa_forward(x_in: Tensor, p: FdsaParams) -> Tensor:
	if x_in.ndim != 5 or x_in.shape[1] != p.channels:
		raise ShapeError(f'FDSA with C={p.channels} got input of shape {x_in.shape}')
	with layer_scope('fdsa'):
		x = conv(p.dw7, x_in)
		q, k, v = lin(p.q, x), lin(p.k, x), lin(p.v, x)
		attended = mul(softmax_spatial(freq_attention_scores(q, k)), v)
		if p.fc1 is None:
			return attended
		return multi_freq_recalibrate(attended, p)
