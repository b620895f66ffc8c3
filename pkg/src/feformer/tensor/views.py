from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

import numpy as np

if TYPE_CHECKING:
	from feformer.tensor.service import Tensor

VJP = Callable[[np.ndarray], tuple[np.ndarray | None, ...]]


@dataclass
class TapeNode:
	"""One recorded operation: the output, the inputs it was computed from and its vector-Jacobian rule.

	The saved activations the rule needs live in the `vjp` closure.
	"""

	op: str
	inputs: tuple['Tensor', ...]
	output: 'Tensor'
	vjp: VJP
	scope: str | None = None


@dataclass
class GradCheckReport:
	max_rel_err: float
	tol: float
	coordinates_checked: int
	worst_input: int | None = None
	worst_index: tuple[int, ...] | None = None
	analytic: float = 0.0
	numeric: float = 0.0
	per_input: list[float] = field(default_factory=list)

	@property
	def passed(self) -> bool:
		return self.max_rel_err <= self.tol

	def describe(self) -> str:
		status = 'pass' if self.passed else 'FAIL'
		where = ''
		if self.worst_input is not None:
			where = f' at input {self.worst_input} index {self.worst_index} (analytic {self.analytic:.6e}, numeric {self.numeric:.6e})'
		return f'{status}: max_rel_err={self.max_rel_err:.3e} tol={self.tol:.1e} over {self.coordinates_checked} coordinates{where}'
