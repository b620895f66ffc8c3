import logging
from typing import Callable, Sequence

import numpy as np

from feformer.exceptions import NonFiniteError
from feformer.tensor.service import Tape, Tensor, backward, no_record
from feformer.tensor.views import GradCheckReport

logger = logging.getLogger(__name__)


def _scalar(value: Tensor) -> float:
	return float(np.real(value.data).reshape(-1).sum())


def finite_difference_check(
	op_closure: Callable[..., Tensor],
	inputs: Sequence[Tensor],
	h: float = 1e-5,
	tol: float = 1e-4,
	max_coordinates: int | None = None,
	rng: np.random.Generator | None = None,
) -> GradCheckReport:
	"""Compare tape gradients of `op_closure(*inputs)` against central differences.

	Every coordinate of every input is probed unless `max_coordinates` is given, in which case that many
	coordinates are drawn at random (without replacement) across all inputs. The relative error of one
	coordinate is |a - n| / max(|a|, |n|, 1e-8).
	"""
	if h <= 0:
		raise ValueError(f'finite-difference step must be positive, got {h}')
	for i, tensor in enumerate(inputs):
		if not np.all(np.isfinite(tensor.data)):
			raise NonFiniteError(f'input {i} of the gradient check is not finite', layer='gradcheck')

	for tensor in inputs:
		tensor.requires_grad = True
		tensor.grad = None
	with Tape() as tape:
		loss = op_closure(*inputs)
	backward(loss, tape)
	analytic = [np.zeros_like(t.data) if t.grad is None else t.grad for t in inputs]

	coordinates = [(i, idx) for i, t in enumerate(inputs) for idx in np.ndindex(*t.shape)]
	if max_coordinates is not None and max_coordinates < len(coordinates):
		rng = rng or np.random.default_rng(0)
		picks = rng.choice(len(coordinates), size=max_coordinates, replace=False)
		coordinates = [coordinates[k] for k in sorted(picks)]

	report = GradCheckReport(max_rel_err=0.0, tol=tol, coordinates_checked=len(coordinates), per_input=[0.0] * len(inputs))
	with no_record():
		for i, idx in coordinates:
			data = inputs[i].data
			original = data[idx]
			data[idx] = original + h
			f_plus = _scalar(op_closure(*inputs))
			data[idx] = original - h
			f_minus = _scalar(op_closure(*inputs))
			data[idx] = original
			numeric = (f_plus - f_minus) / (2.0 * h)
			if not np.isfinite(numeric):
				raise NonFiniteError(f'perturbation of input {i} at {idx} produced a non-finite result', layer='gradcheck')
			exact = float(np.real(analytic[i][idx]))
			rel = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-8)
			report.per_input[i] = max(report.per_input[i], rel)
			if rel > report.max_rel_err or report.worst_input is None:
				report.max_rel_err = max(report.max_rel_err, rel)
				report.worst_input, report.worst_index = i, tuple(int(v) for v in idx)
				report.analytic, report.numeric = exact, numeric

	logger.debug(report.describe())
	return report
