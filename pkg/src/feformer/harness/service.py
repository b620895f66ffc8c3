import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from feformer.blocks.views import RunMode
from feformer.config import RunConfig, num_threads
from feformer.exceptions import NonFiniteError
from feformer.harness.augment import augment, normalize_intensity, random_crop
from feformer.harness.metrics import dice_metric, hd95_metric
from feformer.harness.optim import adamw_step, init_optim_state, load_optim_state, poly_lr, save_optim_state
from feformer.harness.views import EvalResult, HistoryRow, Phantom, TrainResult
from feformer.model.checkpoint import load_checkpoint, save_checkpoint
from feformer.model.loss import seg_loss
from feformer.model.service import build_model, model_forward
from feformer.model.views import FEFormer
from feformer.tensor.service import Tape, Tensor, backward, no_record
from feformer.utils import time_execution_sync

logger = logging.getLogger(__name__)


def optim_path(checkpoint: str | Path) -> Path:
	checkpoint = Path(checkpoint)
	return checkpoint.with_name(checkpoint.name + '.opt')


def _step_seed(seed: int, step: int, slot: int) -> np.random.SeedSequence:
	return np.random.SeedSequence([seed, step, slot])


def _prepare(phantom: Phantom, cfg: RunConfig, seed: int, step: int, slot: int) -> Phantom:
	sample = augment(phantom, _step_seed(seed, step, slot)) if cfg.augment else phantom
	if cfg.crop is not None:
		sample = random_crop(sample, cfg.crop, np.random.default_rng(_step_seed(seed, step, slot + 1000)))
	if cfg.normalize:
		sample = Phantom(volume=normalize_intensity(sample.volume), labels=sample.labels, spec=sample.spec)
	return sample


def _batches(phantoms: list[Phantom], cfg: RunConfig, seed: int, start: int, stop: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
	"""Augmented batches for steps [start, stop), prepared ahead on worker threads and yielded in step order."""

	def build(step: int) -> tuple[np.ndarray, np.ndarray]:
		samples = [_prepare(phantoms[(step * cfg.batch + j) % len(phantoms)], cfg, seed, step, j) for j in range(cfg.batch)]
		return np.concatenate([s.volume for s in samples], axis=0), np.stack([s.labels for s in samples])

	workers = num_threads()
	with ThreadPoolExecutor(max_workers=workers) as pool:
		pending = {}
		for step in range(start, stop):
			for ahead in range(step, min(step + 2 * workers, stop)):
				if ahead not in pending:
					pending[ahead] = pool.submit(build, ahead)
			yield pending.pop(step).result()


def predict(model: FEFormer, volume: np.ndarray) -> np.ndarray:
	"""Argmax labels (B, D, H, W) with batch norm on running statistics and nothing recorded."""
	if volume.ndim == 3:
		volume = volume[None, None]
	with no_record():
		logits = model_forward(model, Tensor(volume), RunMode(training=False))
	return np.argmax(logits.data, axis=1)


def evaluate(model: FEFormer, phantoms: list[Phantom], step: int, spacing: float = 1.0, normalize: bool = False) -> EvalResult:
	n_classes = model.config.n_classes
	dice = {c: [] for c in range(1, n_classes)}
	hd95 = {c: [] for c in range(1, n_classes)}
	for phantom in phantoms:
		volume = normalize_intensity(phantom.volume) if normalize else phantom.volume
		pred = predict(model, volume)[0]
		for c in range(1, n_classes):
			dice[c].append(dice_metric(pred, phantom.labels, c))
			hd95[c].append(hd95_metric(pred, phantom.labels, c, spacing=spacing))
	return EvalResult(
		step=step,
		dice={c: float(np.mean(v)) for c, v in dice.items()},
		hd95={c: float(np.mean(v)) for c, v in hd95.items()},
	)


def write_history(path: str | Path, rows: list[HistoryRow], n_classes: int) -> Path:
	"""Tab-separated: step, lr, loss, then one Dice column per class (empty on steps without evaluation)."""
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	header = ['step', 'lr', 'loss'] + [f'dice_{c}' for c in range(n_classes)]
	lines = ['\t'.join(header)]
	for row in rows:
		dice = ['' if row.dice is None or c not in row.dice else f'{row.dice[c]:.4f}' for c in range(n_classes)]
		lines.append('\t'.join([str(row.step), f'{row.lr:.6e}', repr(row.loss)] + dice))
	path.write_text('\n'.join(lines) + '\n')
	return path


@time_execution_sync('--train_toy')
def train_toy(
	cfg: RunConfig,
	phantoms: list[Phantom],
	steps: int | None = None,
	seed: int | None = None,
	resume: str | Path | None = None,
	on_step: Callable[[HistoryRow], None] | None = None,
) -> TrainResult:
	"""Overfit the configured model on `phantoms`; writes the history table and the final checkpoint.

	Every random draw of step `t` is seeded from (seed, t), so a resumed run replays the same batches.
	"""
	if not phantoms:
		raise ValueError('train_toy needs at least one phantom')
	total = cfg.steps if steps is None else steps
	seed = cfg.train_seed if seed is None else seed
	lr0, lr_min = cfg.learning_rates()

	if resume is not None:
		model = load_checkpoint(resume)
		state = load_optim_state(optim_path(resume))
		logger.info(f'resuming from {resume} at step {state.step}')
	else:
		model = build_model(cfg.model)
		state = init_optim_state(model.store, lr=lr0, weight_decay=cfg.weight_decay)

	history: list[HistoryRow] = []
	evals: list[EvalResult] = []
	start = state.step
	for step, (volume, labels) in enumerate(_batches(phantoms, cfg, seed, start, total), start=start):
		lr = poly_lr(step, total, lr0, lr_min, cfg.power)
		mode = RunMode(training=True, rng=np.random.default_rng(_step_seed(seed, step, 9999)))
		model.store.zero_grad()
		with Tape() as tape:
			loss = seg_loss(model_forward(model, Tensor(volume), mode), labels)
		value = loss.item()
		if not np.isfinite(value):
			raise NonFiniteError(f'loss is not finite at step {step}', layer='seg_loss')
		backward(loss, tape)
		adamw_step(model.store, state, lr=lr)

		row = HistoryRow(step=step, lr=lr, loss=value)
		if (step + 1) % cfg.eval_every == 0 or step + 1 == total:
			result = evaluate(model, phantoms, step, spacing=cfg.spacing, normalize=cfg.normalize)
			evals.append(result)
			row.dice = result.dice
			logger.info(f'step {step}: mean foreground Dice {result.mean_dice:.2f}, mean HD95 {result.mean_hd95:.2f} mm')
		history.append(row)
		logger.info(f'step {step} lr {lr:.3e} loss {value:.6f}')
		if on_step is not None:
			on_step(row)

	checkpoint = save_checkpoint(model, cfg.checkpoint_path)
	save_optim_state(state, optim_path(checkpoint))
	write_history(cfg.history_path, history, cfg.model.n_classes)
	return TrainResult(history=history, evals=evals, final_checkpoint=str(checkpoint))
