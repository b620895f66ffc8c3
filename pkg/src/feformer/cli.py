"""
Command-line interface for feformer.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration error.
"""

import logging
import sys
from contextlib import nullcontext
from functools import wraps
from pathlib import Path

import click
import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from feformer.checks.bench import bench_attention, growth_ratios, write_bench_table
from feformer.checks.gradients import GRADIENT_CASES, run_gradcheck
from feformer.checks.properties import registry
from feformer.config import load_run_config
from feformer.exceptions import FEFormerError, ShapeError
from feformer.harness.phantoms import phantom_generate
from feformer.harness.service import predict, train_toy
from feformer.harness.views import is_failure
from feformer.model.checkpoint import load_checkpoint
from feformer.model.complexity import flop_count, param_count, param_delta_table
from feformer.model.service import build_model, check_extents
from feformer.model.views import ModelConfig
from feformer.spectral.service import flipped_detail_sign
from feformer.volume_io.service import header_for, read_volume, write_volume

logger = logging.getLogger(__name__)

console = Console()


def _exits_on_error(func):
	"""Print library errors in red and exit with their exit code."""

	@wraps(func)
	def wrapper(*args, **kwargs):
		try:
			return func(*args, **kwargs)
		except FEFormerError as e:
			console.print(f'[red]Error: {e.message}[/red]')
			sys.exit(e.exit_code)

	return wrapper


def _parse_sizes(text: str) -> list[int]:
	try:
		sizes = [int(part) for part in text.replace(' ', '').split(',') if part]
	except ValueError as e:
		raise click.UsageError(f'--sizes takes comma-separated integers, got {text!r}') from e
	if not sizes:
		raise click.UsageError('--sizes needs at least one size')
	return sizes


@click.group()
@click.option('--seed', type=int, default=None, help='Seed for every random draw; overrides config seeds.')
@click.pass_context
def cli(ctx: click.Context, seed: int | None):
	"""FEFormer volumetric segmentation: verification, benchmarks, toy training and inference."""
	ctx.ensure_object(dict)
	ctx.obj['seed'] = seed


def _seed(ctx: click.Context, default: int = 0) -> int:
	seed = ctx.obj.get('seed')
	return default if seed is None else seed


@cli.command()
@click.option('--filter', 'pattern', default=None, help='Glob over property names and tags, e.g. fft or dwt*.')
@click.option('--sabotage-haar', is_flag=True, hidden=True, help='Flip the Haar detail sign (negative control).')
@click.pass_context
@_exits_on_error
def check(ctx: click.Context, pattern: str | None, sabotage_haar: bool):
	"""Run the property suites."""
	selected = registry.registry.select(pattern)
	if not selected:
		raise click.UsageError(f'no property matches {pattern!r}')
	with flipped_detail_sign() if sabotage_haar else nullcontext():
		report = registry.run(pattern, seed=_seed(ctx))

	table = Table(title=f'{len(report.outcomes)} properties')
	table.add_column('property')
	table.add_column('result')
	table.add_column('detail')
	table.add_column('s', justify='right')
	for outcome in report.outcomes:
		status = '[green]pass[/green]' if outcome.passed else '[red]FAIL[/red]'
		table.add_row(outcome.name, status, outcome.detail, f'{outcome.seconds:.2f}')
	console.print(table)

	failure = report.first_failure
	if failure is not None:
		console.print(f'[red]first failing property: {failure.name}[/red]')
		sys.exit(1)
	console.print(f'{len(report.outcomes)} properties passed')


@cli.command()
@click.option('--module', type=click.Choice(['all', *GRADIENT_CASES]), default='all', show_default=True)
@click.option('--tol', type=float, default=None, help='Relative tolerance for every module (default 1e-4, model 1e-3).')
@click.pass_context
@_exits_on_error
def gradcheck(ctx: click.Context, module: str, tol: float | None):
	"""Compare tape gradients with central finite differences."""
	results = run_gradcheck(module, tol=tol, seed=_seed(ctx))
	table = Table(title='finite-difference gradient check')
	for column in ('module', 'max_rel_err', 'tol', 'coordinates', 'result'):
		table.add_column(column)
	for name, report in results:
		status = '[green]pass[/green]' if report.passed else '[red]FAIL[/red]'
		table.add_row(name, f'{report.max_rel_err:.3e}', f'{report.tol:.0e}', str(report.coordinates_checked), status)
	console.print(table)

	failed = [(name, report) for name, report in results if not report.passed]
	if failed:
		name, report = failed[0]
		console.print(f'[red]{name}: {report.describe()}[/red]')
		sys.exit(1)
	console.print(f'gradient check passed for {", ".join(name for name, _ in results)}')


@cli.command()
@click.option('--sizes', default='8,16', show_default=True, help='Comma-separated cube edges.')
@click.option('--repeats', type=int, default=5, show_default=True)
@click.option('--output', type=click.Path(dir_okay=False), default='runs/bench.tsv', show_default=True)
@click.pass_context
@_exits_on_error
def bench(ctx: click.Context, sizes: str, repeats: int, output: str):
	"""Time frequency-domain against pairwise attention and report model FLOPs."""
	rows = bench_attention(_parse_sizes(sizes), repeats=max(repeats, 5), seed=_seed(ctx))

	table = Table(title='attention wall time (median)')
	for column in ('size', 'voxels', 'freq ms', 'pairwise ms', 'model GFLOPs'):
		table.add_column(column, justify='right')
	for row in rows:
		pairwise = '-' if row.pairwise_ms is None else f'{row.pairwise_ms:.2f}'
		flops = '-' if row.model_flops is None else f'{row.model_flops / 1e9:.2f}'
		table.add_row(str(row.size), str(row.size**3), f'{row.freq_ms:.2f}', pairwise, flops)
	console.print(table)
	for small, large, freq_ratio, pairwise_ratio in growth_ratios(rows):
		pairwise = 'n/a' if pairwise_ratio is None else f'{pairwise_ratio:.1f}x'
		console.print(f'{small}^3 -> {large}^3: frequency {freq_ratio:.1f}x, pairwise {pairwise}')

	report = flop_count(ModelConfig())
	console.print(f'flop_count(96^3, default) = {report.total / 1e9:.2f} G vs 39.13 G ({report.relative_gap:+.1%})')
	path = write_bench_table(output, rows)
	console.print(f'bench table written to {path}')


@cli.command()
@click.option('--config', 'config_file', type=click.Path(dir_okay=False), default=None, help='Run config whose model section is counted.')
@_exits_on_error
def complexity(config_file: str | None):
	"""Parameter and FLOP counts of a model config, with the per-decision delta table."""
	cfg = load_run_config(config_file).model if config_file else ModelConfig()
	params = param_count(build_model(cfg, dry=True).store)
	flops = flop_count(cfg)

	table = Table(title='parameters by module')
	table.add_column('module')
	table.add_column('params', justify='right')
	for name, count in params.breakdown.items():
		table.add_row(name, f'{count:,}')
	table.add_row('[bold]total[/bold]', f'[bold]{params.total:,}[/bold]')
	console.print(table)
	console.print(f'params {params.total / 1e6:.2f} M vs 18.54 M ({params.relative_gap:+.1%})')
	console.print(f'FLOPs at 96^3 {flops.total / 1e9:.2f} G vs 39.13 G ({flops.relative_gap:+.1%})')

	deltas = Table(title='parameter change per decision')
	for column in ('decision', 'delta', 'method'):
		deltas.add_column(column)
	for row in param_delta_table(cfg):
		deltas.add_row(row.decision, f'{row.params_delta:+,}', row.method)
	console.print(deltas)


@cli.command()
@click.option('--config', 'config_file', type=click.Path(dir_okay=False), default='configs/toy.cfg', show_default=True)
@click.option('--resume', type=click.Path(dir_okay=False), default=None, help='Checkpoint to continue from.')
@click.option('--steps', type=int, default=None, help='Override the configured step count.')
@click.pass_context
@_exits_on_error
def train(ctx: click.Context, config_file: str, resume: str | None, steps: int | None):
	"""Overfit the model on synthetic phantoms."""
	cfg = load_run_config(config_file)
	if ctx.obj.get('seed') is not None:
		cfg.train_seed = ctx.obj['seed']
		cfg.model = cfg.model.model_copy(update={'seed': ctx.obj['seed']})
	console.print(Panel.fit(f'{cfg.n_phantoms} phantoms at {cfg.extent}^3, C={cfg.model.C}, {steps or cfg.steps} steps', title='train', border_style='blue'))

	phantoms = phantom_generate(cfg.phantom_seed, cfg.extent, cfg.model.n_classes, cfg.n_phantoms)
	result = train_toy(cfg, phantoms, steps=steps, resume=resume)
	if result.evals:
		final = result.evals[-1]
		hd95 = 'FAILURE' if any(is_failure(v) for v in final.hd95.values()) else f'{final.mean_hd95:.2f} mm'
		console.print(f'final mean foreground Dice {final.mean_dice:.2f}, mean HD95 {hd95}')
	console.print(f'history: {cfg.history_path}\ncheckpoint: {result.final_checkpoint}')


@cli.command()
@click.option('--checkpoint', type=click.Path(dir_okay=False), required=True)
@click.option('--input', 'input_file', type=click.Path(dir_okay=False), required=True)
@click.option('--output', 'output_file', type=click.Path(dir_okay=False), required=True)
@_exits_on_error
def infer(checkpoint: str, input_file: str, output_file: str):
	"""Segment a volume file and write the label volume."""
	header, data = read_volume(input_file)
	check_extents(header.extents)
	model = load_checkpoint(checkpoint)
	if header.channels != model.config.in_channels:
		raise ShapeError(f'{input_file} has {header.channels} channels, the model expects {model.config.in_channels}')
	labels = predict(model, data[None].astype(np.float64))[0].astype(np.uint8)
	write_volume(output_file, header_for(labels, spacing=header.spacing, dtype='u8'), labels)
	counts = np.bincount(labels.reshape(-1), minlength=model.config.n_classes)
	console.print(f'wrote labels to {output_file}; voxels per class {counts.tolist()}')


@cli.command()
@click.option('--config', 'config_file', type=click.Path(dir_okay=False), default='configs/toy.cfg', show_default=True)
@click.option('--output-dir', type=click.Path(file_okay=False), default='runs/phantoms', show_default=True)
@click.pass_context
@_exits_on_error
def phantom(ctx: click.Context, config_file: str, output_dir: str):
	"""Write the configured synthetic phantoms as volume and label files."""
	cfg = load_run_config(config_file)
	seed = _seed(ctx, cfg.phantom_seed)
	out = Path(output_dir)
	for i, p in enumerate(phantom_generate(seed, cfg.extent, cfg.model.n_classes, cfg.n_phantoms)):
		write_volume(out / f'phantom{i}.vol', header_for(p.volume[0], spacing=cfg.spacing), p.volume[0])
		write_volume(out / f'phantom{i}_labels.vol', header_for(p.labels, spacing=cfg.spacing, dtype='u8'), p.labels)
	console.print(f'wrote {cfg.n_phantoms} phantoms to {out}')


if __name__ == '__main__':
	cli()
