"""
Verification properties run by `feformer check`.

Each property draws its inputs from the seeded generator it is given and raises AssertionError with
the measured quantity when the property does not hold.
"""

import dataclasses
import logging
import math

import numpy as np

from feformer.blocks.fgmlp import fgmlp_forward, make_fgmlp
from feformer.blocks.views import RunMode
from feformer.blocks.waff import make_waff, waff_forward
from feformer.checks import oracles
from feformer.checks.registry import Registry
from feformer.exceptions import ShapeError, SpectralError, TapeError
from feformer.harness.augment import augment
from feformer.harness.metrics import dice_metric, hd95_metric
from feformer.harness.optim import poly_lr
from feformer.harness.phantoms import rasterize_shape
from feformer.harness.views import Phantom, ShapeSpec
from feformer.model.complexity import flop_count, param_count
from feformer.model.service import block_forward, build_model, trace_shapes
from feformer.model.views import ModelConfig
from feformer.nn.params import ParamStore
from feformer.nn.service import conv3d, pool, softmax
from feformer.nn.views import ConvSpec, PoolKind
from feformer.spectral.service import band_masks, dwt3_haar, fft3, idwt3_haar, ifft3, real_part, spectral_product
from feformer.spectral.views import SUBBAND_KEYS, SubbandSet
from feformer.tensor.service import Tape, Tensor, add, backward, matmul, mul, no_record, sum_

logger = logging.getLogger(__name__)

registry = Registry()

SIZES = (2, 4, 8)


def _close(actual: float, bound: float, what: str) -> str:
	assert actual < bound, f'{what} {actual:.3e} exceeds {bound:.0e}'
	return f'{what} {actual:.2e}'


# FFT


@registry.property('ifft3(fft3(x)) == x for sizes 2, 4, 8', tags=['fft'])
def fft_round_trip(rng: np.random.Generator) -> str:
	worst = 0.0
	for n in SIZES:
		x = rng.standard_normal((2, 3, n, n, n))
		with no_record():
			back = ifft3(fft3(Tensor(x))).data
		worst = max(worst, float(np.max(np.abs(back - x))))
	return _close(worst, 1e-10, 'max abs error')


@registry.property('fft3 agrees with a direct DFT by matrix products', tags=['fft', 'oracle'])
def fft_matches_direct_dft(rng: np.random.Generator) -> str:
	worst = 0.0
	for extents in ((2, 2, 2), (4, 4, 4), (8, 8, 8), (6, 4, 10)):
		x = rng.standard_normal((1, 2) + extents)
		with no_record():
			spectrum = fft3(Tensor(x)).data
		worst = max(worst, float(np.max(np.abs(spectrum - oracles.direct_dft3(x)))))
	return _close(worst, 1e-9, 'max abs error')


@registry.property('Parseval: sum |x|^2 == sum |X|^2 / N', tags=['fft'])
def fft_parseval(rng: np.random.Generator) -> str:
	worst = 0.0
	for n in SIZES:
		x = rng.standard_normal((2, 2, n, n, n))
		with no_record():
			spectrum = fft3(Tensor(x)).data
		spatial = float(np.sum(x**2))
		spectral = float(np.sum(np.abs(spectrum) ** 2)) / n**3
		worst = max(worst, abs(spatial - spectral) / spatial)
	return _close(worst, 1e-10, 'relative gap')


@registry.property('ifft3(fft3(q) * fft3(k)) equals brute-force circular convolution on 100 cases', tags=['fft', 'oracle'])
def convolution_theorem(rng: np.random.Generator) -> str:
	worst = 0.0
	for case in range(100):
		n = 4 if case % 2 == 0 else 8
		b, c = int(rng.integers(1, 3)), int(rng.integers(1, 4))
		q, k = rng.standard_normal((b, c, n, n, n)), rng.standard_normal((b, c, n, n, n))
		with no_record():
			spectral = spectral_product(Tensor(q), Tensor(k)).data
		worst = max(worst, float(np.max(np.abs(spectral - oracles.circular_convolution3(q, k)))))
	return _close(worst, 1e-10, 'max abs error')


@registry.property('real spectra invert with no imaginary residue; non-Hermitian spectra are rejected', tags=['fft'])
def ifft_residue(rng: np.random.Generator) -> str:
	x = rng.standard_normal((1, 2, 4, 4, 4))
	with no_record():
		_, residue = ifft3(fft3(Tensor(x)), tol=1e-8, return_residue=True)
		spectrum = rng.standard_normal((1, 2, 4, 4, 4)) + 1j * rng.standard_normal((1, 2, 4, 4, 4))
		try:
			ifft3(Tensor(spectrum), tol=1e-8)
		except SpectralError:
			rejected = True
		else:
			rejected = False
	assert rejected, 'a random complex spectrum passed the imaginary residue check'
	return _close(residue, 1e-12, 'residue of a real round trip')


# band masks


@registry.property('low, mid and high masks partition every bin exactly once', tags=['masks', 'fft'])
def band_masks_partition(rng: np.random.Generator) -> str:
	for n in SIZES:
		masks = band_masks((n, n, n))
		total = masks.low + masks.mid + masks.high
		assert np.array_equal(total, np.ones((n, n, n))), f'masks overlap or leave gaps on a {n}^3 grid'
	return f'partitions on {SIZES}'


@registry.property('the DC bin is in the low band', tags=['masks'])
def dc_in_low_band(rng: np.random.Generator) -> str:
	for n in SIZES:
		assert band_masks((n, n, n)).low[0, 0, 0] == 1.0, f'DC not in low band on a {n}^3 grid'
	return 'DC low on all sizes'


@registry.property('band membership agrees with per-bin radius enumeration', tags=['masks', 'oracle'])
def band_masks_match_enumeration(rng: np.random.Generator) -> str:
	r1, r2 = 1 / 3, 2 / 3
	for extents in ((2, 2, 2), (4, 4, 4), (8, 8, 8), (4, 6, 8)):
		radius = oracles.radius_by_enumeration(extents)
		masks = band_masks(extents, (r1, r2))
		assert np.array_equal(masks.low, (radius <= r1).astype(float)), f'low band differs on {extents}'
		assert np.array_equal(masks.high, (radius > r2).astype(float)), f'high band differs on {extents}'
	return 'membership matches'


@registry.property('degenerate cutoffs raise', tags=['masks'])
def degenerate_cutoffs_rejected(rng: np.random.Generator) -> str:
	for cutoffs in ((0.5, 0.5), (0.0, 0.5), (0.6, 0.3), (0.2, 1.5)):
		try:
			band_masks((4, 4, 4), cutoffs)
		except SpectralError:
			continue
		raise AssertionError(f'cutoffs {cutoffs} were accepted')
	return 'all rejected'


# Haar wavelet


@registry.property('idwt3_haar(dwt3_haar(x)) == x', tags=['dwt'])
def dwt_round_trip(rng: np.random.Generator) -> str:
	worst = 0.0
	for n in SIZES:
		x = rng.standard_normal((2, 3, n, n, n))
		with no_record():
			back = idwt3_haar(dwt3_haar(Tensor(x))).data
		worst = max(worst, float(np.max(np.abs(back - x))))
	return _close(worst, 1e-10, 'max abs error')


@registry.property('the orthonormal Haar analysis preserves energy', tags=['dwt'])
def dwt_energy(rng: np.random.Generator) -> str:
	worst = 0.0
	for n in SIZES:
		x = rng.standard_normal((1, 2, n, n, n))
		with no_record():
			energy = dwt3_haar(Tensor(x)).energy()
		worst = max(worst, abs(energy - float(np.sum(x**2))) / float(np.sum(x**2)))
	return _close(worst, 1e-12, 'relative gap')


@registry.property('a constant volume maps to LLL = 2*sqrt(2)*v and zero detail bands', tags=['dwt'])
def dwt_constant_input(rng: np.random.Generator) -> str:
	value = float(rng.uniform(-3, 3))
	with no_record():
		bands = dwt3_haar(Tensor(np.full((1, 1, 4, 4, 4), value)))
	worst = float(np.max(np.abs(bands['LLL'].data - 2 * math.sqrt(2) * value)))
	for key in SUBBAND_KEYS[1:]:
		worst = max(worst, float(np.max(np.abs(bands[key].data))))
	return _close(worst, 1e-12, 'max deviation')


@registry.property('zeroing LLL before idwt3_haar leaves x minus its 2x2x2 block means', tags=['dwt', 'oracle'])
def idwt_zero_lll_block_mean(rng: np.random.Generator) -> str:
	worst = 0.0
	for n in SIZES:
		x = rng.standard_normal((1, 2, n, n, n))
		with no_record():
			bands = dwt3_haar(Tensor(x))
			detail = dict(bands.bands, LLL=Tensor(np.zeros_like(bands['LLL'].data)))
			out = idwt3_haar(SubbandSet(bands=detail, source_shape=bands.source_shape)).data
		blocks = x.reshape(1, 2, n // 2, 2, n // 2, 2, n // 2, 2)
		expected = (blocks - blocks.mean(axis=(3, 5, 7), keepdims=True)).reshape(x.shape)
		worst = max(worst, float(np.max(np.abs(out - expected))))
	return _close(worst, 1e-12, 'max abs error')


@registry.property('odd spatial extents are rejected by the Haar transform', tags=['dwt'])
def dwt_odd_extent(rng: np.random.Generator) -> str:
	try:
		dwt3_haar(Tensor(np.zeros((1, 1, 4, 3, 4))))
	except ShapeError:
		return 'rejected'
	raise AssertionError('extent 3 was accepted')


# nn primitives


@registry.property('softmax rows sum to 1 and ignore a constant shift', tags=['softmax'])
def softmax_normalized(rng: np.random.Generator) -> str:
	x = rng.standard_normal((2, 3, 5)) * 10
	with no_record():
		out = softmax(Tensor(x), axis=-1).data
		shifted = softmax(Tensor(x + 123.0), axis=-1).data
	worst = max(float(np.max(np.abs(out.sum(axis=-1) - 1.0))), float(np.max(np.abs(out - shifted))))
	return _close(worst, 1e-12, 'max deviation')


@registry.property('global spatial average of a constant volume is that constant', tags=['pool'])
def global_pool_constant(rng: np.random.Generator) -> str:
	values = rng.standard_normal(3)
	x = np.broadcast_to(values.reshape(1, 3, 1, 1, 1), (1, 3, 4, 4, 4)).copy()
	with no_record():
		pooled = pool(PoolKind.GLOBAL_AVG_SPATIAL, Tensor(x)).data
	return _close(float(np.max(np.abs(pooled.reshape(3) - values))), 1e-12, 'max deviation')


@registry.property('channel pools equal the channel mean and max', tags=['pool'])
def channel_pools(rng: np.random.Generator) -> str:
	x = rng.standard_normal((2, 5, 3, 3, 3))
	with no_record():
		avg = pool(PoolKind.AVG_OVER_CHANNELS, Tensor(x)).data
		top = pool(PoolKind.MAX_OVER_CHANNELS, Tensor(x)).data
	assert np.array_equal(top, x.max(axis=1, keepdims=True)), 'max over channels differs from numpy max'
	return _close(float(np.max(np.abs(avg - x.mean(axis=1, keepdims=True)))), 1e-12, 'mean deviation')


@registry.property('conv3d matches a per-voxel naive convolution (strided, grouped, depthwise)', tags=['conv', 'oracle'])
def conv_matches_naive(rng: np.random.Generator) -> str:
	worst = 0.0
	for spec in (
		ConvSpec(4, 6, kernel=3, stride=2, padding=1, groups=2),
		ConvSpec(4, 4, kernel=3, groups=4),
		ConvSpec(3, 2, kernel=1),
	):
		x = rng.standard_normal((2, spec.in_channels, 5, 5, 5))
		weight, bias = rng.standard_normal(spec.weight_shape), rng.standard_normal(spec.out_channels)
		with no_record():
			out = conv3d(Tensor(x), spec, Tensor(weight), Tensor(bias)).data
		naive = oracles.naive_conv3d(x, weight, bias, stride=spec.stride, padding=spec.padding, groups=spec.groups)
		worst = max(worst, float(np.max(np.abs(out - naive))))
	return _close(worst, 1e-10, 'max abs error')


@registry.property('transposed conv is the adjoint of the strided conv: <Ax, y> == <x, A^T y>', tags=['conv'])
def conv_transpose_adjoint(rng: np.random.Generator) -> str:
	forward = ConvSpec(3, 4, kernel=3, stride=2, padding=1)
	adjoint = ConvSpec(4, 3, kernel=3, stride=2, padding=1, transposed=True, output_padding=1)
	weight = Tensor(rng.standard_normal(forward.weight_shape))
	x, y = rng.standard_normal((1, 3, 4, 4, 4)), rng.standard_normal((1, 4, 2, 2, 2))
	with no_record():
		lhs = float(np.sum(conv3d(Tensor(x), forward, weight).data * y))
		rhs = float(np.sum(x * conv3d(Tensor(y), adjoint, weight).data))
	return _close(abs(lhs - rhs) / max(abs(lhs), 1e-12), 1e-12, 'relative gap')


@registry.property('matmul matches a triple-loop product', tags=['tensor', 'oracle'])
def matmul_matches_naive(rng: np.random.Generator) -> str:
	a, b = rng.standard_normal((5, 7)), rng.standard_normal((7, 3))
	with no_record():
		out = matmul(Tensor(a), Tensor(b)).data
	return _close(float(np.max(np.abs(out - oracles.naive_matmul(a, b)))), 1e-12, 'max abs error')


@registry.property('backward of sum(x*x) is 2x and a consumed tape cannot be reused', tags=['tensor', 'autodiff'])
def backward_square(rng: np.random.Generator) -> str:
	x = Tensor(np.array([1.0, -2.0]), requires_grad=True)
	with Tape() as tape:
		loss = sum_(mul(x, x))
	backward(loss, tape)
	assert np.array_equal(x.grad, np.array([2.0, -4.0])), f'gradient {x.grad} is not [2, -4]'
	try:
		backward(loss, tape)
	except TapeError:
		return 'grad [2, -4]'
	raise AssertionError('a consumed tape was swept twice')


def _input_grad(x: np.ndarray, loss_fn) -> np.ndarray:
	t = Tensor(x, requires_grad=True)
	with Tape() as tape:
		loss = loss_fn(t)
	backward(loss, tape)
	return t.grad


@registry.property('backward is linear in the upstream gradient', tags=['tensor', 'autodiff'])
def backward_linearity(rng: np.random.Generator) -> str:
	x = rng.standard_normal((1, 2, 4, 4, 4))
	u, v = rng.standard_normal(x.shape), rng.standard_normal(x.shape)
	a, b = rng.standard_normal(2)

	def out(t: Tensor) -> Tensor:
		return add(softmax(mul(t, t), axis=-1), real_part(fft3(t)))

	g_u = _input_grad(x, lambda t: sum_(mul(out(t), Tensor(u))))
	g_v = _input_grad(x, lambda t: sum_(mul(out(t), Tensor(v))))
	g_mix = _input_grad(x, lambda t: sum_(mul(out(t), Tensor(a * u + b * v))))
	gap = float(np.max(np.abs(g_mix - (a * g_u + b * g_v)))) / max(1.0, float(np.max(np.abs(g_mix))))
	return _close(gap, 1e-10, 'relative gap')


@registry.property('the gradient of sum(w * ifft3(fft3(x))) is w', tags=['fft', 'autodiff'])
def fft_round_trip_gradient(rng: np.random.Generator) -> str:
	worst = 0.0
	for n in SIZES:
		x, w = rng.standard_normal((1, 2, n, n, n)), rng.standard_normal((1, 2, n, n, n))
		grad = _input_grad(x, lambda t: sum_(mul(ifft3(fft3(t)), Tensor(w))))
		worst = max(worst, float(np.max(np.abs(grad - w))))
	return _close(worst, 1e-10, 'max abs error')


@registry.property('blocks with every weight zeroed act as the identity', tags=['blocks'])
def zero_block_identity(rng: np.random.Generator) -> str:
	model = build_model(ModelConfig(C=4, n_classes=2, depths=1, seed=int(rng.integers(1 << 16))))
	for _, param in model.store.named_parameters():
		param.data[...] = 0.0
	x = rng.standard_normal((1, 4, 4, 4, 4))
	with no_record():
		out = block_forward(Tensor(x), model.stages['encoder0'].blocks[0], RunMode(training=False)).data
	return _close(float(np.max(np.abs(out - x))), 1e-12, 'max deviation')


@registry.property('WAFF with zero fuse weights and bias +20 returns x1 + x2', tags=['blocks'])
def waff_saturated_sum(rng: np.random.Generator) -> str:
	store = ParamStore(seed=int(rng.integers(1 << 16)))
	p = make_waff(store.scope('waff'))
	p.fuse[0].weight.data[...] = 0.0
	p.fuse[0].bias.data[...] = 20.0
	x1, x2 = rng.standard_normal((1, 3, 8, 8, 8)), rng.standard_normal((1, 3, 8, 8, 8))
	with no_record():
		out = waff_forward(Tensor(x1), Tensor(x2), p).data
	return _close(float(np.max(np.abs(out - (x1 + x2)))), 1e-6, 'max deviation')


@registry.property('FGMLP with a saturated modulator returns the plain MLP output', tags=['blocks'])
def fgmlp_saturated_modulator(rng: np.random.Generator) -> str:
	store = ParamStore(seed=int(rng.integers(1 << 16)))
	p = make_fgmlp(store.scope('mlp'), 8)
	p.modulator.weight.data[...] = 0.0
	p.modulator.bias.data[...] = 20.0
	x = Tensor(rng.standard_normal((1, 8, 4, 4, 4)))
	with no_record():
		x_out = fgmlp_forward(x, dataclasses.replace(p, kernel_gen1=None, kernel_gen2=None, modulator=None)).data
		out = fgmlp_forward(x, p).data
	return _close(float(np.max(np.abs(out - x_out))), 1e-6, 'max deviation')


# metrics


@registry.property('dice_metric equals set-count Dice on 50 random label volumes', tags=['metrics', 'oracle'])
def dice_matches_oracle(rng: np.random.Generator) -> str:
	for _ in range(50):
		pred, true = rng.integers(0, 3, (5, 5, 5)), rng.integers(0, 3, (5, 5, 5))
		for c in (1, 2):
			ours, oracle = dice_metric(pred, true, c), oracles.set_count_dice(pred, true, c)
			assert ours == oracle, f'class {c}: {ours} vs {oracle}'
			assert ours == dice_metric(true, pred, c), 'dice is not symmetric'
	return 'exact on 50 cases'


@registry.property('hd95_metric (exact and distance transform) equals pairwise enumeration on 50 random masks', tags=['metrics', 'oracle'])
def hd95_matches_oracle(rng: np.random.Generator) -> str:
	worst = 0.0
	for _ in range(50):
		pred = (rng.random((6, 6, 6)) < 0.3).astype(np.int64)
		true = (rng.random((6, 6, 6)) < 0.3).astype(np.int64)
		spacing = tuple(rng.uniform(0.5, 2.0, 3))
		oracle = oracles.exact_hd95(pred == 1, true == 1, spacing)
		for method in ('exact', 'edt'):
			ours = hd95_metric(pred, true, 1, spacing=spacing, method=method)
			if math.isinf(oracle):
				assert math.isinf(ours), f'{method}: expected the failure sentinel, got {ours}'
				continue
			worst = max(worst, abs(ours - oracle))
	return _close(worst, 1e-9, 'max abs error')


@registry.property('single voxels 3 apart give HD95 of 3 mm; an empty prediction is a failure', tags=['metrics'])
def hd95_single_pair(rng: np.random.Generator) -> str:
	pred, true = np.zeros((8, 8, 8), dtype=np.int64), np.zeros((8, 8, 8), dtype=np.int64)
	pred[2, 4, 4] = 1
	true[5, 4, 4] = 1
	distance = hd95_metric(pred, true, 1)
	assert distance == 3.0, f'HD95 {distance}, expected 3.0'
	assert math.isinf(hd95_metric(np.zeros_like(true), true, 1)), 'empty prediction did not fail'
	return 'HD95 3.0'


# harness and model contracts


@registry.property('a radius-8 sphere rasterizes to within the surface bound of 4/3*pi*r^3', tags=['harness'])
def sphere_volume(rng: np.random.Generator) -> str:
	r = 8
	count = int(rasterize_shape(ShapeSpec(kind='sphere', center=(16, 16, 16), size=r, class_id=1, intensity=1.0), 32).sum())
	expected, bound = math.floor(4 * math.pi * r**3 / 3), 4 * math.pi * r**2 * 2
	assert abs(count - expected) <= bound, f'{count} voxels, expected {expected} +- {bound:.0f}'
	return f'{count} voxels (ideal {expected})'


@registry.property('augmentation with mirrors and noise disabled is the identity', tags=['harness'])
def augment_identity(rng: np.random.Generator) -> str:
	labels = rng.integers(0, 3, (8, 8, 8))
	phantom = Phantom(volume=labels[None, None] / 2.0, labels=labels)
	out = augment(phantom, int(rng.integers(1 << 16)), mirror_prob=0.0, noise_var_max=0.0, brightness_prob=0.0)
	assert np.array_equal(out.volume, phantom.volume) and np.array_equal(out.labels, phantom.labels), 'augment changed the phantom'
	return 'identity'


@registry.property('poly_lr runs from 1e-3 to 3e-5 without increasing', tags=['harness'])
def poly_lr_schedule(rng: np.random.Generator) -> str:
	rates = [poly_lr(step, 100) for step in range(101)]
	assert abs(rates[0] - 1e-3) < 1e-15 and abs(rates[-1] - 3e-5) < 1e-15, f'endpoints {rates[0]}, {rates[-1]}'
	assert all(a >= b for a, b in zip(rates, rates[1:])), 'schedule increases somewhere'
	return _close(abs(poly_lr(50, 100) - 5.498e-4), 1e-6, 'midpoint deviation from 5.498e-4')


@registry.property('a 96^3 input follows the (64,24^3)/(128,12^3)/(256,6^3)/(512,3^3) stage schedule', tags=['model'])
def shape_schedule(rng: np.random.Generator) -> str:
	shapes = trace_shapes(ModelConfig(), (96, 96, 96))
	expected = {
		'encoder0': (64, 24, 24, 24),
		'encoder1': (128, 12, 12, 12),
		'encoder2': (256, 6, 6, 6),
		'bottleneck': (512, 3, 3, 3),
		'decoder0': (64, 24, 24, 24),
		'logits': (16, 96, 96, 96),
	}
	for name, shape in expected.items():
		assert shapes[name] == shape, f'{name} is {shapes[name]}, expected {shape}'
	return 'schedule matches'


@registry.property('default model has 18.54 M parameters within 10%', tags=['complexity'])
def param_contract(rng: np.random.Generator) -> str:
	report = param_count(build_model(ModelConfig(), dry=True).store)
	assert abs(report.relative_gap) <= 0.10, f'{report.total:,} parameters is {report.relative_gap:+.1%} off'
	return f'{report.total:,} ({report.relative_gap:+.1%})'


@registry.property('default model costs 39.13 GFLOPs at 96^3 within 15%', tags=['complexity'])
def flop_contract(rng: np.random.Generator) -> str:
	report = flop_count(ModelConfig())
	assert abs(report.relative_gap) <= 0.15, f'{report.total / 1e9:.2f} GFLOPs is {report.relative_gap:+.1%} off'
	return f'{report.total / 1e9:.2f} G ({report.relative_gap:+.1%})'
