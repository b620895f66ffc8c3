"""
Finite-difference gradient suite over every trainable module.

Each case differentiates a fixed random projection of the module output (the plain sum of logits for
the full model) with respect to the module input and all of its parameters, at step h=1e-5.
"""

import logging
from typing import Callable

import numpy as np

from feformer.blocks.baselines import make_standard_attention, standard_attention_forward
from feformer.blocks.bridge import decoder_stem, encoder_stem, fcsb_forward, make_fcsb, make_stem
from feformer.blocks.fdsa import fdsa_forward, make_fdsa
from feformer.blocks.fgmlp import fgmlp_forward, make_fgmlp
from feformer.blocks.views import RunMode
from feformer.blocks.waff import make_waff, waff_forward
from feformer.checks.views import GradientCase
from feformer.exceptions import ConfigError
from feformer.model.service import build_model, model_forward
from feformer.model.views import ModelConfig
from feformer.nn.params import ParamStore
from feformer.tensor.gradcheck import finite_difference_check
from feformer.tensor.service import Tensor, add, mul, sum_
from feformer.tensor.views import GradCheckReport

logger = logging.getLogger(__name__)

MODULE_TOL = 1e-4
MODEL_TOL = 1e-3
MODEL_COORDINATES = 200
# random coordinates drawn per case on top of the input volume size
PARAM_COORDINATES = 300


def _projection(rng: np.random.Generator, shape: tuple[int, ...]) -> Tensor:
	return Tensor(rng.standard_normal(shape))


def _projected(out: Tensor, weights: Tensor) -> Tensor:
	return sum_(mul(out, weights))


def _store(seed: int) -> ParamStore:
	return ParamStore(seed=seed)


def fdsa_case(rng: np.random.Generator, seed: int) -> GradientCase:
	store = _store(seed)
	p = make_fdsa(store.scope('fdsa'), 4, (1 / 3, 2 / 3))
	x = Tensor(rng.standard_normal((1, 4, 4, 4, 4)))
	weights = _projection(rng, x.shape)
	params = [t for _, t in store.named_parameters()]
	return GradientCase('fdsa', lambda x, *_: _projected(fdsa_forward(x, p), weights), [x, *params], MODULE_TOL, max_coordinates=x.size + PARAM_COORDINATES)


def fgmlp_case(rng: np.random.Generator, seed: int) -> GradientCase:
	store = _store(seed)
	p = make_fgmlp(store.scope('mlp'), 4)
	x = Tensor(rng.standard_normal((1, 4, 4, 4, 4)))
	weights = _projection(rng, x.shape)
	mode = RunMode(training=False)
	params = [t for _, t in store.named_parameters()]
	return GradientCase(
		'fgmlp', lambda x, *_: _projected(fgmlp_forward(x, p, mode), weights), [x, *params], MODULE_TOL, max_coordinates=x.size + PARAM_COORDINATES
	)


def waff_case(rng: np.random.Generator, seed: int) -> GradientCase:
	store = _store(seed)
	p = make_waff(store.scope('waff'))
	x1, x2 = Tensor(rng.standard_normal((1, 2, 4, 4, 4))), Tensor(rng.standard_normal((1, 2, 4, 4, 4)))
	weights = _projection(rng, x1.shape)
	params = [t for _, t in store.named_parameters()]
	return GradientCase('waff', lambda a, b, *_: _projected(waff_forward(a, b, p), weights), [x1, x2, *params], MODULE_TOL)


def fcsb_case(rng: np.random.Generator, seed: int) -> GradientCase:
	store = _store(seed)
	p = make_fcsb(store.scope('bridge'), 8)
	x1, x2 = Tensor(rng.standard_normal((1, 4, 8, 8, 8))), Tensor(rng.standard_normal((1, 8, 4, 4, 4)))
	# the cross output is a softmax over 8^3 voxels times V, about 1/512 of V; weight it back up to the scale of the
	# spectral output so rounding in the sum of the two projections stays far below the cross-path gradients
	w1 = Tensor(rng.standard_normal(x1.shape) * float(np.prod(x1.shape[-3:])))
	w2 = _projection(rng, x2.shape)
	mode = RunMode(training=True)
	params = [t for _, t in store.named_parameters()]

	def closure(a, b, *_):
		x1_hat, x2_hat = fcsb_forward(a, b, p, mode)
		return add(_projected(x1_hat, w1), _projected(x2_hat, w2))

	return GradientCase('fcsb', closure, [x1, x2, *params], MODULE_TOL, max_coordinates=2 * PARAM_COORDINATES)


def stem_case(rng: np.random.Generator, seed: int) -> GradientCase:
	store = _store(seed)
	p = make_stem(store.scope('stem'), 1, 8, 3)
	x = Tensor(rng.standard_normal((1, 1, 8, 8, 8)))
	weights = _projection(rng, (1, 3, 8, 8, 8))
	mode = RunMode(training=True)
	params = [t for _, t in store.named_parameters()]

	def closure(x, *_):
		_, x2 = encoder_stem(x, p, mode)
		return _projected(decoder_stem(x2, None, None, p, mode), weights)

	return GradientCase('stem', closure, [x, *params], MODULE_TOL, max_coordinates=2 * PARAM_COORDINATES)


def attention_case(rng: np.random.Generator, seed: int) -> GradientCase:
	store = _store(seed)
	p = make_standard_attention(store.scope('attention'), 4)
	x = Tensor(rng.standard_normal((1, 4, 2, 2, 2)))
	weights = _projection(rng, x.shape)
	params = [t for _, t in store.named_parameters()]
	return GradientCase('attention', lambda x, *_: _projected(standard_attention_forward(x, p), weights), [x, *params], MODULE_TOL)


def model_case(rng: np.random.Generator, seed: int) -> GradientCase:
	model = build_model(ModelConfig(C=4, depths=1, n_classes=3, seed=seed))
	x = Tensor(rng.standard_normal((1, 1, 32, 32, 32)))
	mode = RunMode(training=True)
	params = [t for _, t in model.store.named_parameters()]
	return GradientCase(
		'model',
		lambda x, *_: sum_(model_forward(model, x, mode)),
		[x, *params],
		MODEL_TOL,
		max_coordinates=MODEL_COORDINATES,
	)


GRADIENT_CASES: dict[str, Callable[[np.random.Generator, int], GradientCase]] = {
	'fdsa': fdsa_case,
	'fgmlp': fgmlp_case,
	'waff': waff_case,
	'fcsb': fcsb_case,
	'stem': stem_case,
	'attention': attention_case,
	'model': model_case,
}


def run_gradcheck(module: str = 'all', tol: float | None = None, seed: int = 0) -> list[tuple[str, GradCheckReport]]:
	"""Reports in suite order. `tol` overrides every case's default tolerance."""
	if module != 'all' and module not in GRADIENT_CASES:
		raise ConfigError(f'unknown module {module!r}; expected all or one of {", ".join(GRADIENT_CASES)}')
	names = list(GRADIENT_CASES) if module == 'all' else [module]
	results = []
	for name in names:
		rng = np.random.default_rng([seed, len(results)])
		case = GRADIENT_CASES[name](rng, seed)
		report = finite_difference_check(
			case.closure,
			case.inputs,
			h=case.h,
			tol=case.tol if tol is None else tol,
			max_coordinates=case.max_coordinates,
			rng=rng,
		)
		logger.result(f'{name}: {report.describe()}')
		results.append((name, report))
	return results
