from feformer.harness.augment import augment, mirror, normalize_intensity, random_crop
from feformer.harness.metrics import dice_metric, hd95_metric, surface_mask
from feformer.harness.optim import adamw_step, init_optim_state, load_optim_state, poly_lr, save_optim_state
from feformer.harness.phantoms import paint_phantom, phantom_generate, rasterize_shape
from feformer.harness.service import evaluate, optim_path, predict, train_toy, write_history
from feformer.harness.views import HD95_FAILURE, EvalResult, HistoryRow, OptimState, Phantom, ShapeSpec, TrainResult, is_failure

__all__ = [
	'HD95_FAILURE',
	'EvalResult',
	'HistoryRow',
	'OptimState',
	'Phantom',
	'ShapeSpec',
	'TrainResult',
	'adamw_step',
	'augment',
	'dice_metric',
	'evaluate',
	'hd95_metric',
	'init_optim_state',
	'is_failure',
	'load_optim_state',
	'mirror',
	'normalize_intensity',
	'optim_path',
	'paint_phantom',
	'phantom_generate',
	'poly_lr',
	'predict',
	'random_crop',
	'rasterize_shape',
	'save_optim_state',
	'surface_mask',
	'train_toy',
	'write_history',
]
