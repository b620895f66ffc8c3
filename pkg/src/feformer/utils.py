import logging
import time
from functools import wraps
from typing import Callable, ParamSpec, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

R = TypeVar('R')
P = ParamSpec('P')


def time_execution_sync(additional_text: str = '') -> Callable[[Callable[P, R]], Callable[P, R]]:
	def decorator(func: Callable[P, R]) -> Callable[P, R]:
		@wraps(func)
		def wrapper(*args: P.args, **kwargs: P.kwargs) -> R:
			start_time = time.perf_counter()
			result = func(*args, **kwargs)
			execution_time = time.perf_counter() - start_time
			logger.debug(f'{additional_text} Execution time: {execution_time:.3f} seconds')
			return result

		return wrapper

	return decorator


def median_wall_time(func: Callable[[], object], repeats: int = 5) -> float:
	"""Median wall-clock seconds of `repeats` calls."""
	samples = []
	for _ in range(max(repeats, 1)):
		start_time = time.perf_counter()
		func()
		samples.append(time.perf_counter() - start_time)
	return float(np.median(samples))
