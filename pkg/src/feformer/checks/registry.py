import logging
import time
from typing import Callable

import numpy as np

from feformer.checks.views import CheckOutcome, CheckRegistry, CheckReport, RegisteredCheck
from feformer.utils import time_execution_sync

logger = logging.getLogger(__name__)


class Registry:
	"""Service for registering and running verification properties"""

	def __init__(self, exclude: list[str] | None = None):
		self.registry = CheckRegistry()
		self.exclude = exclude if exclude is not None else []

	def property(self, description: str, tags: list[str] | None = None):
		"""Decorator for registering a property. The function takes a seeded Generator and raises AssertionError on failure."""

		def decorator(func: Callable):
			if func.__name__ in self.exclude:
				return func
			if func.__name__ in self.registry.checks:
				raise ValueError(f'Property {func.__name__} is already registered')
			self.registry.checks[func.__name__] = RegisteredCheck(
				name=func.__name__,
				description=description,
				function=func,
				tags=tags or [],
			)
			return func

		return decorator

	def run_one(self, check: RegisteredCheck, seed: int = 0) -> CheckOutcome:
		rng = np.random.default_rng(seed)
		start = time.perf_counter()
		try:
			detail = check.function(rng)
			passed = True
		except AssertionError as e:
			detail, passed = str(e) or type(e).__name__, False
		except Exception as e:
			logger.debug(f'{check.name} raised', exc_info=True)
			detail, passed = f'{type(e).__name__}: {e}', False
		return CheckOutcome(name=check.name, passed=passed, detail=detail or '', seconds=time.perf_counter() - start)

	@time_execution_sync('--run_checks')
	def run(self, pattern: str | None = None, seed: int = 0, stop_on_failure: bool = False) -> CheckReport:
		report = CheckReport()
		for check in self.registry.select(pattern):
			outcome = self.run_one(check, seed)
			report.outcomes.append(outcome)
			if outcome.passed:
				logger.debug(f'{check.name}: pass ({outcome.seconds:.2f}s)')
			else:
				logger.error(f'{check.name}: FAIL {outcome.detail}')
				if stop_on_failure:
					break
		passed = sum(o.passed for o in report.outcomes)
		logger.result(f'{passed}/{len(report.outcomes)} properties passed')
		return report
