from feformer.nn.service import (
	activation,
	batch_norm,
	channels_first,
	channels_last,
	conv3d,
	dropout,
	dynamic_depthwise_conv,
	gelu,
	layer_norm,
	linear,
	log_softmax,
	pointwise_linear,
	pool,
	relu,
	relu6,
	sigmoid,
	softmax,
	softmax_spatial,
	upsample,
)
from feformer.nn.views import Activation, ConvSpec, PoolKind

__all__ = [
	'Activation',
	'ConvSpec',
	'PoolKind',
	'activation',
	'batch_norm',
	'channels_first',
	'channels_last',
	'conv3d',
	'dropout',
	'dynamic_depthwise_conv',
	'gelu',
	'layer_norm',
	'linear',
	'log_softmax',
	'pointwise_linear',
	'pool',
	'relu',
	'relu6',
	'sigmoid',
	'softmax',
	'softmax_spatial',
	'upsample',
]
