"""Wavelet-guided adaptive fusion of a skip feature with an upsampled decoder feature, per Haar subband."""

import logging

from feformer.blocks.layers import conv, make_conv
from feformer.blocks.views import ConvParams, WaffParams
from feformer.exceptions import ShapeError
from feformer.nn.params import ParamScope
from feformer.nn.service import pool, sigmoid
from feformer.nn.views import ConvSpec, PoolKind
from feformer.spectral.service import dwt3_haar, idwt3_haar
from feformer.spectral.views import SUBBAND_KEYS, SubbandSet
from feformer.tensor.service import Tensor, add, concat, getitem, layer_scope, mul

logger = logging.getLogger(__name__)


def make_waff(scope: ParamScope, shared: bool = True) -> WaffParams:
	if shared:
		return WaffParams(fuse=[make_conv(scope, 'fuse', ConvSpec(2, 2, kernel=7, groups=2))])
	return WaffParams(fuse=[make_conv(scope, f'fuse_{key}', ConvSpec(2, 2, kernel=7, groups=2)) for key in SUBBAND_KEYS])


def fuse_subband_pair(a: Tensor, b: Tensor, p: ConvParams) -> Tensor:
	if a.shape != b.shape:
		raise ShapeError(f'subband pair shapes differ: {a.shape} vs {b.shape}')
	stacked = concat([a, b], axis=1)
	descriptor = concat([pool(PoolKind.AVG_OVER_CHANNELS, stacked), pool(PoolKind.MAX_OVER_CHANNELS, stacked)], axis=1)
	weights = sigmoid(conv(p, descriptor))
	w1, w2 = getitem(weights, (slice(None), slice(0, 1))), getitem(weights, (slice(None), slice(1, 2)))
	return add(mul(w1, a), mul(w2, b))


def waff_forward(x1: Tensor, x2: Tensor, p: WaffParams) -> Tensor:
	if x1.shape != x2.shape:
		raise ShapeError(f'WAFF inputs differ in shape: {x1.shape} vs {x2.shape}')
	with layer_scope('waff'):
		bands1, bands2 = dwt3_haar(x1), dwt3_haar(x2)
		fused = {key: fuse_subband_pair(bands1[key], bands2[key], p.for_band(i)) for i, key in enumerate(SUBBAND_KEYS)}
		return idwt3_haar(SubbandSet(bands=fused, source_shape=x1.shape))
