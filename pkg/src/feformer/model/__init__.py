from feformer.model.checkpoint import load_checkpoint, save_checkpoint
from feformer.model.complexity import flop_count, param_count, param_delta_table
from feformer.model.loss import seg_loss
from feformer.model.service import block_forward, build_model, model_forward, trace_shapes
from feformer.model.views import FEFormer, ModelConfig
from feformer.nn.params import ParamStore

__all__ = [
	'FEFormer',
	'ModelConfig',
	'ParamStore',
	'block_forward',
	'build_model',
	'flop_count',
	'load_checkpoint',
	'model_forward',
	'param_count',
	'param_delta_table',
	'save_checkpoint',
	'seg_loss',
	'trace_shapes',
]
