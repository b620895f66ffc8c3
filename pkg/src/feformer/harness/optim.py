import logging
import struct
from pathlib import Path

import numpy as np

from feformer.exceptions import CheckpointError, ConfigError, TapeError
from feformer.harness.views import OptimState
from feformer.model.checkpoint import read_arrays, write_arrays
from feformer.nn.params import ParamStore

logger = logging.getLogger(__name__)

OPTIM_MAGIC = b'FEO1'


def init_optim_state(store: ParamStore, lr: float = 1e-3, weight_decay: float = 0.01) -> OptimState:
	return OptimState(
		m={name: np.zeros_like(t.data) for name, t in store.named_parameters()},
		v={name: np.zeros_like(t.data) for name, t in store.named_parameters()},
		lr=lr,
		weight_decay=weight_decay,
	)


def adamw_step(store: ParamStore, st: OptimState, lr: float | None = None) -> OptimState:
	"""One AdamW update in place. Weight decay is applied to the parameter directly, apart from the moments."""
	missing = [name for name, t in store.named_parameters() if t.grad is None]
	if missing:
		raise TapeError(f'{len(missing)} parameters have no gradient, first: {missing[0]}')
	if lr is not None:
		st.lr = lr
	st.step += 1
	beta1, beta2 = st.betas
	correction1 = 1.0 - beta1**st.step
	correction2 = 1.0 - beta2**st.step
	for name, param in store.named_parameters():
		grad = param.grad
		m, v = st.m[name], st.v[name]
		if st.weight_decay:
			param.data *= 1.0 - st.lr * st.weight_decay
		m *= beta1
		m += (1.0 - beta1) * grad
		v *= beta2
		v += (1.0 - beta2) * grad * grad
		param.data -= st.lr * (m / correction1) / (np.sqrt(v / correction2) + st.eps)
	return st


def poly_lr(step: int, total_steps: int, lr0: float = 1e-3, lr_min: float = 3e-5, power: float = 0.9) -> float:
	if total_steps < 0 or not 0 <= step <= total_steps:
		raise ConfigError(f'step {step} is outside the schedule [0, {total_steps}]')
	if total_steps == 0:
		return lr0
	return lr_min + (lr0 - lr_min) * (1.0 - step / total_steps) ** power


def save_optim_state(st: OptimState, path: str | Path) -> Path:
	path = Path(path)
	arrays = {f'm:{name}': data for name, data in st.m.items()}
	arrays.update({f'v:{name}': data for name, data in st.v.items()})
	header = struct.pack('<Q5d', st.step, st.lr, st.betas[0], st.betas[1], st.eps, st.weight_decay)
	write_arrays(path, OPTIM_MAGIC, arrays, header=header)
	return path


def load_optim_state(path: str | Path) -> OptimState:
	header, arrays = read_arrays(Path(path), OPTIM_MAGIC, header_size=struct.calcsize('<Q5d'))
	try:
		step, lr, beta1, beta2, eps, weight_decay = struct.unpack('<Q5d', header)
	except struct.error as e:
		raise CheckpointError(f'{path}: malformed optimizer header') from e
	m = {name.removeprefix('m:'): data for name, data in arrays.items() if name.startswith('m:')}
	v = {name.removeprefix('v:'): data for name, data in arrays.items() if name.startswith('v:')}
	return OptimState(m=m, v=v, step=step, lr=lr, betas=(beta1, beta2), eps=eps, weight_decay=weight_decay)
