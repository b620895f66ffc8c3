"""Wall-clock comparison of frequency-domain attention against pairwise attention over growing volumes."""

import logging
from pathlib import Path

import numpy as np

from feformer.blocks.baselines import make_standard_attention, standard_attention_forward
from feformer.blocks.fdsa import freq_attention_scores
from feformer.checks.views import BenchRow
from feformer.exceptions import ConfigError
from feformer.model.complexity import flop_count
from feformer.model.views import DOWNSAMPLE, ModelConfig
from feformer.nn.params import ParamStore
from feformer.nn.service import softmax_spatial
from feformer.tensor.service import Tensor, mul, no_record
from feformer.utils import median_wall_time

logger = logging.getLogger(__name__)

BENCH_CHANNELS = 16
# pairwise scores take 8 * N^2 bytes per head
PAIRWISE_MAX_VOXELS = 16**3


def _freq_attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
	return mul(softmax_spatial(freq_attention_scores(q, k)), v)


def bench_attention(sizes: list[int], repeats: int = 5, seed: int = 0, channels: int = BENCH_CHANNELS) -> list[BenchRow]:
	if not sizes:
		raise ConfigError('bench needs at least one size')
	if any(n <= 0 for n in sizes):
		raise ConfigError(f'sizes must be positive, got {sizes}')
	rng = np.random.default_rng(seed)
	attention = make_standard_attention(ParamStore(seed=seed).scope('attention'), channels)
	rows = []
	with no_record():
		for n in sizes:
			q, k, v = (Tensor(rng.standard_normal((1, channels, n, n, n))) for _ in range(3))
			freq_ms = 1e3 * median_wall_time(lambda: _freq_attention(q, k, v), repeats)
			pairwise_ms = None
			if n**3 <= PAIRWISE_MAX_VOXELS:
				pairwise_ms = 1e3 * median_wall_time(lambda: standard_attention_forward(q, attention), repeats)
			model_flops = flop_count(ModelConfig(), (n, n, n)).total if n % DOWNSAMPLE == 0 else None
			rows.append(BenchRow(size=n, freq_ms=freq_ms, pairwise_ms=pairwise_ms, model_flops=model_flops))
			logger.info(f'{n}^3: frequency {freq_ms:.2f} ms, pairwise ' + (f'{pairwise_ms:.2f} ms' if pairwise_ms is not None else 'skipped'))
	return rows


def growth_ratios(rows: list[BenchRow]) -> list[tuple[int, int, float, float | None]]:
	"""(from size, to size, frequency time ratio, pairwise time ratio) for consecutive rows."""
	ratios = []
	for a, b in zip(rows, rows[1:]):
		pairwise = b.pairwise_ms / a.pairwise_ms if a.pairwise_ms and b.pairwise_ms else None
		ratios.append((a.size, b.size, b.freq_ms / a.freq_ms, pairwise))
	return ratios


def write_bench_table(path: str | Path, rows: list[BenchRow]) -> Path:
	"""Tab-separated, one row per size; cells that were not measured are left empty."""
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	lines = ['size\tvoxels\tfreq_ms\tpairwise_ms\tmodel_flops']
	for row in rows:
		pairwise = '' if row.pairwise_ms is None else f'{row.pairwise_ms:.4f}'
		flops = '' if row.model_flops is None else str(row.model_flops)
		lines.append(f'{row.size}\t{row.size**3}\t{row.freq_ms:.4f}\t{pairwise}\t{flops}')
	path.write_text('\n'.join(lines) + '\n')
	return path
