import fnmatch
from dataclasses import dataclass, field
from typing import Callable

from pydantic import BaseModel, ConfigDict


class RegisteredCheck(BaseModel):
	"""A named property with the tags `--filter` matches against"""

	name: str
	description: str
	function: Callable
	tags: list[str] = []

	model_config = ConfigDict(arbitrary_types_allowed=True)

	def matches(self, pattern: str | None) -> bool:
		"""Glob match of `pattern` against the name or any tag; no pattern matches everything"""
		if not pattern:
			return True
		return fnmatch.fnmatch(self.name, pattern) or any(fnmatch.fnmatch(tag, pattern) for tag in self.tags)


class CheckRegistry(BaseModel):
	checks: dict[str, RegisteredCheck] = {}

	def select(self, pattern: str | None = None) -> list[RegisteredCheck]:
		return [check for check in self.checks.values() if check.matches(pattern)]


@dataclass
class CheckOutcome:
	name: str
	passed: bool
	detail: str = ''
	seconds: float = 0.0


@dataclass
class CheckReport:
	outcomes: list[CheckOutcome] = field(default_factory=list)

	@property
	def passed(self) -> bool:
		return all(o.passed for o in self.outcomes)

	@property
	def first_failure(self) -> CheckOutcome | None:
		return next((o for o in self.outcomes if not o.passed), None)


@dataclass
class GradientCase:
	"""One module of the gradient suite: a closure and the inputs it is differentiated against."""

	module: str
	closure: Callable
	inputs: list
	tol: float
	h: float = 1e-5
	max_coordinates: int | None = None


@dataclass
class BenchRow:
	size: int
	freq_ms: float
	pairwise_ms: float | None
	model_flops: int | None
