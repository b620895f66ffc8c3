from feformer.checks.bench import bench_attention, growth_ratios, write_bench_table
from feformer.checks.gradients import GRADIENT_CASES, run_gradcheck
from feformer.checks.properties import registry
from feformer.checks.registry import Registry
from feformer.checks.views import BenchRow, CheckOutcome, CheckReport, RegisteredCheck

__all__ = [
	'GRADIENT_CASES',
	'BenchRow',
	'CheckOutcome',
	'CheckReport',
	'RegisteredCheck',
	'Registry',
	'bench_attention',
	'growth_ratios',
	'registry',
	'run_gradcheck',
	'write_bench_table',
]
