"""Plain hierarchical-transformer counterparts of the frequency blocks, for ablations and benchmarks."""

import logging

import numpy as np

from feformer.blocks.layers import conv, make_conv, make_linear
from feformer.blocks.views import ConcatFuseParams, StandardAttentionParams
from feformer.exceptions import ShapeError
from feformer.nn.params import ParamScope
from feformer.nn.service import channels_first, channels_last, linear, softmax
from feformer.nn.views import ConvSpec
from feformer.tensor.service import Tensor, concat, layer_scope, matmul, mul, reshape, transpose

logger = logging.getLogger(__name__)


def make_standard_attention(scope: ParamScope, channels: int, num_heads: int = 1) -> StandardAttentionParams:
	if channels % num_heads:
		raise ShapeError(f'C={channels} is not divisible by {num_heads} heads')
	return StandardAttentionParams(
		q=make_linear(scope, 'q', channels, channels),
		k=make_linear(scope, 'k', channels, channels),
		v=make_linear(scope, 'v', channels, channels),
		o=make_linear(scope, 'o', channels, channels),
		num_heads=num_heads,
	)


def standard_attention_forward(x: Tensor, p: StandardAttentionParams) -> Tensor:
	"""Pairwise softmax attention over all voxels; O(N^2 C) time and O(N^2) memory per head."""
	b, c, d, h, w = x.shape
	n, heads = d * h * w, p.num_heads
	head_dim = c // heads
	with layer_scope('attention'):
		tokens = reshape(channels_last(x), (b, n, c))

		def split_heads(t: Tensor) -> Tensor:
			return transpose(reshape(t, (b, n, heads, head_dim)), (0, 2, 1, 3))

		q = split_heads(linear(tokens, p.q.weight, p.q.bias))
		k = split_heads(linear(tokens, p.k.weight, p.k.bias))
		v = split_heads(linear(tokens, p.v.weight, p.v.bias))
		scores = mul(matmul(q, transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(head_dim))
		mixed = matmul(softmax(scores, axis=-1), v)
		merged = reshape(transpose(mixed, (0, 2, 1, 3)), (b, n, c))
		out = linear(merged, p.o.weight, p.o.bias)
		return channels_first(reshape(out, (b, d, h, w, c)))


def make_concat_fuse(scope: ParamScope, channels: int) -> ConcatFuseParams:
	return ConcatFuseParams(conv=make_conv(scope, 'fuse', ConvSpec(2 * channels, channels, kernel=1)))


def concat_fuse_forward(x1: Tensor, x2: Tensor, p: ConcatFuseParams) -> Tensor:
	if x1.shape != x2.shape:
		raise ShapeError(f'fusion inputs differ in shape: {x1.shape} vs {x2.shape}')
	return conv(p.conv, concat([x1, x2], axis=1))
