"""
Parameter and FLOP accounting.

FLOPs count a multiply-add as two operations: a convolution costs 2 * Cout * Cin/groups * k^3 per
output voxel (per input voxel for transposed convolutions) and a linear map 2 * Cin * Cout per voxel.
A 3D FFT costs 5 * N * log2(N) per channel. Elementwise work, normalization, pooling and softmax are
not counted.
"""

import logging
import math

import numpy as np

from feformer.model.service import build_model, trace_shapes
from feformer.model.views import STAGE_NAMES, DeltaRow, FlopReport, ModelConfig, ParamReport
from feformer.nn.params import ParamStore

logger = logging.getLogger(__name__)


def param_count(store: ParamStore) -> ParamReport:
	"""Learnable values only; batch-norm running statistics are buffers and not counted."""
	breakdown: dict[str, int] = {}
	for name, tensor in store.named_parameters():
		key = name.split('.')[0]
		breakdown[key] = breakdown.get(key, 0) + int(np.prod(tensor.shape))
	return ParamReport(total=sum(breakdown.values()), breakdown=breakdown)


def _dry_total(cfg: ModelConfig) -> int:
	return build_model(cfg, dry=True).store.num_learnable()


def param_delta_table(cfg: ModelConfig) -> list[DeltaRow]:
	"""Parameter change caused by flipping each open architectural decision."""
	base = _dry_total(cfg)
	rows = []
	for decision, update in (
		('per-subband WAFF parameters', {'waff_shared': False}),
		('dense kernel-generator second conv', {'kernel_generator': 'dense'}),
		('no stem bridge', {'stem_bridge': False}),
	):
		if all(getattr(cfg, key) == value for key, value in update.items()):
			continue
		rows.append(DeltaRow(decision, _dry_total(cfg.model_copy(update=update)) - base, 'dry build'))

	widths = cfg.stage_channels()
	if cfg.attention == 'fdsa':
		w_o = sum(depth * (c * c + c) for c, depth in zip(widths, cfg.depths))
		rows.append(DeltaRow('FDSA output projection W_o', w_o, 'closed form'))

	expand_delta = sum((2 * c * c) - (8 * 2 * c * c) for c in widths[4:])
	rows.append(DeltaRow('patch expanding as trilinear upsample + 1x1x1 conv', expand_delta, 'closed form'))

	half, quarter, k = cfg.C // 2, cfg.C // 4, cfg.n_classes

	def second_projection(width: int) -> int:
		return (27 * half * width + width + 2 * width) + (27 * width * width + width + 2 * width) + (width * k + k)

	rows.append(DeltaRow('decoder stem second projection at C/4', second_projection(quarter) - second_projection(half), 'closed form'))
	return rows


def fft_flops(voxels: int, channels: int = 1) -> float:
	if voxels <= 1:
		return 0.0
	return 5.0 * voxels * math.log2(voxels) * channels


def _conv_flops(cin: int, cout: int, k: int, voxels: int, groups: int = 1) -> float:
	return 2.0 * cout * (cin // groups) * k**3 * voxels


def flop_count(cfg: ModelConfig, extents=(96, 96, 96), batch: int = 1) -> FlopReport:
	"""Closed-form forward cost of the configured model on one input of the given extents."""
	shapes = trace_shapes(cfg, extents)
	report = FlopReport()

	def voxels(name: str) -> int:
		return int(np.prod(shapes[name][1:]))

	full = int(np.prod(extents))
	v1, v2 = voxels('stem.x1'), voxels('stem.x2')
	half, c0 = cfg.C // 2, cfg.C
	report.add('stem.encoder0', _conv_flops(cfg.in_channels, half, 3, v1) + _conv_flops(half, half, 3, v1))
	report.add('stem.encoder1', _conv_flops(half, c0, 3, v2) + _conv_flops(c0, c0, 3, v2))

	widths = cfg.stage_channels()
	k3 = cfg.lowpass_k**3
	for name, c, depth in zip(STAGE_NAMES, widths, cfg.depths):
		v = voxels(name)
		if name.startswith('decoder'):
			report.add(f'{name}.expand', _conv_flops(2 * c, c, 2, v // 8))
			if cfg.fusion == 'waff':
				report.add(f'{name}.waff', _conv_flops(2, 2, 7, v, groups=2))
			else:
				report.add(f'{name}.concat', _conv_flops(2 * c, c, 1, v))
		for b in range(depth):
			prefix = f'{name}.block{b}'
			if cfg.attention == 'standard':
				report.add(f'{prefix}.attention', 4 * 2.0 * c * c * v + 2 * 2.0 * v * v * c)
			else:
				transforms = 4 if cfg.attention == 'fdsa' else 3
				fc = 2.0 * (3 * c * (3 * c // 4) + (3 * c // 4) * c) if cfg.attention == 'fdsa' else 0.0
				report.add(f'{prefix}.fdsa', _conv_flops(c, c, 7, v, groups=c) + 3 * 2.0 * c * c * v + fc)
				report.add(f'{prefix}.fdsa.fft', fft_flops(v, c) * transforms)
			mlp = 2 * 2.0 * c * cfg.mlp_ratio * c * v
			if cfg.mlp == 'fgmlp':
				groups = c // 4 if cfg.kernel_generator == 'grouped' else 1
				mlp += _conv_flops(c, c // 4, 1, 1) + _conv_flops(c // 4, c * k3, 1, 1, groups=groups)
				mlp += 2.0 * c * k3 * v + _conv_flops(2, 2, 7, v, groups=2)
			report.add(f'{prefix}.mlp', mlp)
		if name.startswith('encoder'):
			report.add(f'{name}.merge', _conv_flops(c, 2 * c, 3, v // 8))

	if cfg.stem_bridge:
		report.add('bridge.spectral', _conv_flops(c0, c0, 1, v2) + _conv_flops(half, c0, 1, v2))
		report.add('bridge.spectral.fft', 2 * fft_flops(v2, half))
		report.add('bridge.cross', 3 * 2.0 * half * half * v1)
		report.add('bridge.cross.fft', 3 * fft_flops(v1, half))

	report.add('stem.decoder0', _conv_flops(c0, half, 3, v2) + _conv_flops(half, half, 3, v2))
	report.add('stem.decoder1', _conv_flops(half, half, 3, v1) + _conv_flops(half, half, 3, v1))
	report.add('stem.head', _conv_flops(half, cfg.n_classes, 1, full))

	if batch != 1:
		report.entries = [(name, flops * batch) for name, flops in report.entries]
	logger.debug(f'flop_count({tuple(extents)}) = {report.total:,}')
	return report
