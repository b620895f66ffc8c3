import numpy as np
from scipy.stats import truncnorm


def trunc_normal(shape: tuple[int, ...], rng: np.random.Generator, std: float = 0.02) -> np.ndarray:
	"""Normal(0, std) truncated at two standard deviations."""
	return truncnorm.rvs(-2.0, 2.0, loc=0.0, scale=std, size=shape, random_state=rng).astype(np.float64)


def kaiming_normal(shape: tuple[int, ...], fan_in: int, rng: np.random.Generator) -> np.ndarray:
	return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def zeros(shape: tuple[int, ...]) -> np.ndarray:
	return np.zeros(shape, dtype=np.float64)


def ones(shape: tuple[int, ...]) -> np.ndarray:
	return np.ones(shape, dtype=np.float64)


INITIALIZERS = ('trunc_normal', 'kaiming_normal', 'zeros', 'ones')
