"""PYTEST_DONT_REWRITE: property bodies defined here must raise plain AssertionErrors."""

from types import SimpleNamespace

import numpy as np
import pytest

from feformer.checks.bench import bench_attention, growth_ratios, write_bench_table
from feformer.checks.gradients import GRADIENT_CASES, run_gradcheck
from feformer.checks.oracles import exact_hd95, naive_matmul, set_count_dice
from feformer.checks.properties import registry
from feformer.checks.registry import Registry
from feformer.checks.views import BenchRow
from feformer.exceptions import ConfigError, ShapeError
from feformer.spectral.service import flipped_detail_sign
from feformer.utils import median_wall_time


class TestRegistry:
	def test_register_and_select(self):
		checks = Registry()

		@checks.property('always holds', tags=['demo'])
		def holds(rng):
			return 'fine'

		@checks.property('never holds', tags=['demo', 'broken'])
		def fails(rng):
			assert rng.random() > 2, 'drew a value below 2'

		assert [c.name for c in checks.registry.select('broken')] == ['fails']
		assert [c.name for c in checks.registry.select('h*')] == ['holds']
		assert len(checks.registry.select(None)) == 2

		report = checks.run('demo')
		assert not report.passed
		assert report.first_failure.name == 'fails'
		assert report.first_failure.detail == 'drew a value below 2'
		assert report.outcomes[0].detail == 'fine'

	def test_library_errors_count_as_failures(self):
		checks = Registry()

		@checks.property('raises a shape error')
		def shape(rng):
			raise ShapeError('bad extents')

		assert not checks.run().passed

	def test_unexpected_errors_count_as_failures(self):
		checks = Registry()

		@checks.property('raises a value error')
		def broken(rng):
			raise ValueError('math domain')

		@checks.property('runs after it')
		def after(rng):
			return 'ok'

		report = checks.run()
		assert [o.passed for o in report.outcomes] == [False, True]
		assert report.first_failure.detail == 'ValueError: math domain'

	def test_duplicate_name(self):
		checks = Registry()

		def twice(rng):
			return ''

		checks.property('first')(twice)
		with pytest.raises(ValueError, match='already registered'):
			checks.property('second')(twice)

	def test_exclude(self):
		checks = Registry(exclude=['skipped'])

		@checks.property('excluded')
		def skipped(rng):
			return ''

		assert checks.registry.select() == []

	def test_stop_on_failure(self):
		checks = Registry()

		@checks.property('a')
		def first(rng):
			raise AssertionError('no')

		@checks.property('b')
		def second(rng):
			return ''

		assert len(checks.run(stop_on_failure=True).outcomes) == 1


class TestProperties:
	def test_suite_is_complete(self):
		names = set(registry.registry.checks)
		assert {
			'fft_round_trip',
			'convolution_theorem',
			'band_masks_partition',
			'dwt_round_trip',
			'conv_transpose_adjoint',
			'zero_block_identity',
			'hd95_matches_oracle',
			'poly_lr_schedule',
			'param_contract',
			'flop_contract',
			'idwt_zero_lll_block_mean',
			'backward_linearity',
			'fft_round_trip_gradient',
			'waff_saturated_sum',
			'fgmlp_saturated_modulator',
		} <= names

	@pytest.mark.parametrize('pattern', ['fft', 'masks', 'dwt', 'softmax', 'pool', 'tensor', 'harness', 'complexity'])
	def test_fast_groups_pass(self, pattern):
		report = registry.run(pattern, seed=0)
		assert report.outcomes
		assert report.passed, report.first_failure

	@pytest.mark.slow
	@pytest.mark.parametrize('pattern', ['conv', 'metrics', 'blocks', 'model'])
	def test_slow_groups_pass(self, pattern):
		report = registry.run(pattern, seed=0)
		assert report.passed, report.first_failure

	def test_sabotaged_haar_is_caught(self):
		with flipped_detail_sign():
			report = registry.run('dwt', seed=0)
		assert report.first_failure.name == 'dwt_round_trip'


class TestOracles:
	def test_matmul(self, rng):
		a, b = rng.standard_normal((3, 4)), rng.standard_normal((4, 2))
		np.testing.assert_allclose(naive_matmul(a, b), a @ b)

	def test_dice_and_hd95(self):
		pred = np.zeros((6, 6, 6), dtype=int)
		true = np.zeros((6, 6, 6), dtype=int)
		pred[1, 1, 1] = 1
		true[1, 1, 5] = 1
		assert set_count_dice(pred, true, 1) == 0.0
		assert exact_hd95(pred == 1, true == 1) == pytest.approx(4.0)


class TestGradcheckSuite:
	def test_unknown_module(self):
		with pytest.raises(ConfigError, match='unknown module'):
			run_gradcheck('transformer')

	def test_cases_cover_every_trainable_module(self):
		assert set(GRADIENT_CASES) == {'fdsa', 'fgmlp', 'waff', 'fcsb', 'stem', 'attention', 'model'}

	def test_cases_use_the_standard_step(self):
		for name, make_case in GRADIENT_CASES.items():
			assert make_case(np.random.default_rng(0), 0).h == 1e-5, name

	@pytest.mark.slow
	def test_bridge_and_stem(self):
		for module in ('fcsb', 'stem'):
			[(_, report)] = run_gradcheck(module)
			assert report.passed, report.describe()

	@pytest.mark.slow
	def test_tight_tolerance_fails(self):
		[(_, report)] = run_gradcheck('fdsa', tol=1e-12)
		assert not report.passed
		assert report.max_rel_err > 1e-12
		assert report.worst_input is not None

	@pytest.mark.slow
	def test_full_model(self):
		[(_, report)] = run_gradcheck('model')
		assert report.passed, report.describe()
		assert report.coordinates_checked == 200


class TestBench:
	def test_small_sizes(self, tmp_path):
		rows = bench_attention([4, 8], repeats=1)
		assert [row.size for row in rows] == [4, 8]
		assert all(row.pairwise_ms is not None and row.model_flops is None for row in rows)
		[(small, large, freq_ratio, pairwise_ratio)] = growth_ratios(rows)
		assert (small, large) == (4, 8) and freq_ratio > 0 and pairwise_ratio > 0
		lines = write_bench_table(tmp_path / 'bench.tsv', rows).read_text().splitlines()
		assert lines[0] == 'size\tvoxels\tfreq_ms\tpairwise_ms\tmodel_flops'
		assert lines[2].split('\t')[:2] == ['8', '512']

	def test_pairwise_is_skipped_on_large_grids(self):
		rows = [BenchRow(size=8, freq_ms=1.0, pairwise_ms=2.0, model_flops=None), BenchRow(size=32, freq_ms=4.0, pairwise_ms=None, model_flops=10)]
		assert growth_ratios(rows) == [(8, 32, 4.0, None)]

	def test_median_wall_time(self, monkeypatch):
		clock = iter([0.0, 1.0, 1.0, 4.0, 4.0, 6.0, 6.0, 10.0])
		monkeypatch.setattr('feformer.utils.time', SimpleNamespace(perf_counter=lambda: next(clock)))
		calls = []
		assert median_wall_time(lambda: calls.append(1), repeats=4) == 2.5
		assert len(calls) == 4

	def test_bad_sizes(self):
		with pytest.raises(ConfigError):
			bench_attention([])
		with pytest.raises(ConfigError):
			bench_attention([0, 8])
