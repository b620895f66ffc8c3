import numpy as np
import pytest
from click.testing import CliRunner

from feformer.cli import cli
from feformer.model.checkpoint import save_checkpoint
from feformer.model.service import build_model
from feformer.volume_io.service import header_for, read_volume, write_volume


@pytest.fixture
def runner():
	return CliRunner()


def _write_cfg(path, output_dir, **extra):
	lines = ['model.C=4', 'model.depths=1', 'model.n_classes=3', 'n_phantoms=1', 'batch=1', 'extent=32', f'output_dir={output_dir}']
	lines += [f'{key}={value}' for key, value in extra.items()]
	path.write_text('\n'.join(lines) + '\n')
	return str(path)


class TestCheck:
	def test_fft_properties_pass(self, runner):
		result = runner.invoke(cli, ['check', '--filter', 'fft'])
		assert result.exit_code == 0, result.output
		assert 'properties passed' in result.output

	def test_sabotaged_haar_fails_on_round_trip(self, runner):
		result = runner.invoke(cli, ['check', '--sabotage-haar', '--filter', 'dwt'])
		assert result.exit_code == 1
		assert 'first failing property: dwt_round_trip' in result.output

	def test_filter_without_matches(self, runner):
		result = runner.invoke(cli, ['check', '--filter', 'nothing-here'])
		assert result.exit_code == 2


class TestUsageErrors:
	def test_empty_sizes(self, runner):
		result = runner.invoke(cli, ['bench', '--sizes', ''])
		assert result.exit_code == 2

	def test_unknown_gradcheck_module(self, runner):
		result = runner.invoke(cli, ['gradcheck', '--module', 'transformer'])
		assert result.exit_code == 2

	def test_unknown_config_key(self, runner, tmp_path):
		config = _write_cfg(tmp_path / 'bad.cfg', tmp_path / 'out', bogus=1)
		result = runner.invoke(cli, ['train', '--config', config])
		assert result.exit_code == 2
		assert "unknown config key 'bogus'" in result.output

	def test_missing_checkpoint(self, runner, tmp_path):
		volume = np.zeros((32, 32, 32))
		write_volume(tmp_path / 'in.vol', header_for(volume), volume)
		result = runner.invoke(
			cli, ['infer', '--checkpoint', str(tmp_path / 'absent.fef'), '--input', str(tmp_path / 'in.vol'), '--output', str(tmp_path / 'out.vol')]
		)
		assert result.exit_code == 2
		assert 'Error:' in result.output

	def test_extent_not_divisible_by_32(self, runner, tmp_path):
		volume = np.zeros((16, 32, 32))
		write_volume(tmp_path / 'in.vol', header_for(volume), volume)
		result = runner.invoke(
			cli, ['infer', '--checkpoint', str(tmp_path / 'absent.fef'), '--input', str(tmp_path / 'in.vol'), '--output', str(tmp_path / 'out.vol')]
		)
		assert result.exit_code == 2
		assert 'multiples of 32' in result.output

	def test_malformed_volume(self, runner, tmp_path):
		(tmp_path / 'in.vol').write_bytes(b'not a volume')
		result = runner.invoke(
			cli, ['infer', '--checkpoint', str(tmp_path / 'absent.fef'), '--input', str(tmp_path / 'in.vol'), '--output', str(tmp_path / 'out.vol')]
		)
		assert result.exit_code == 2


@pytest.mark.integration
class TestCommands:
	def test_infer_writes_labels(self, runner, tmp_path, rng, tiny_model_config):
		model = build_model(tiny_model_config)
		for name, buffer in model.store.buffers.items():
			if name.endswith('tracked'):
				buffer[...] = 1
		checkpoint = save_checkpoint(model, tmp_path / 'model.fef')
		volume = rng.random((32, 32, 32))
		write_volume(tmp_path / 'in.vol', header_for(volume, spacing=(1.0, 1.0, 2.0)), volume)

		result = runner.invoke(
			cli, ['infer', '--checkpoint', str(checkpoint), '--input', str(tmp_path / 'in.vol'), '--output', str(tmp_path / 'labels.vol')]
		)
		assert result.exit_code == 0, result.output
		header, labels = read_volume(tmp_path / 'labels.vol')
		assert header.dtype == 'u8' and header.spacing == (1.0, 1.0, 2.0)
		assert labels.shape == (1, 32, 32, 32) and labels.max() < 3

	def test_train_zero_steps(self, runner, tmp_path):
		config = _write_cfg(tmp_path / 'toy.cfg', tmp_path / 'out')
		result = runner.invoke(cli, ['--seed', '3', 'train', '--config', config, '--steps', '0'])
		assert result.exit_code == 0, result.output
		assert (tmp_path / 'out' / 'model.fef').is_file()
		assert (tmp_path / 'out' / 'history.tsv').is_file()

	def test_phantom(self, runner, tmp_path):
		config = _write_cfg(tmp_path / 'toy.cfg', tmp_path / 'out')
		result = runner.invoke(cli, ['phantom', '--config', config, '--output-dir', str(tmp_path / 'phantoms')])
		assert result.exit_code == 0, result.output
		header, labels = read_volume(tmp_path / 'phantoms' / 'phantom0_labels.vol')
		assert header.dtype == 'u8' and set(np.unique(labels)) == {0, 1, 2}
		assert read_volume(tmp_path / 'phantoms' / 'phantom0.vol')[0].dtype == 'f64'

	def test_complexity(self, runner):
		result = runner.invoke(cli, ['complexity'])
		assert result.exit_code == 0, result.output
		assert 'vs 18.54 M' in result.output
		assert 'vs 39.13 G' in result.output

	def test_bench(self, runner, tmp_path):
		result = runner.invoke(cli, ['bench', '--sizes', '4,8', '--output', str(tmp_path / 'bench.tsv')])
		assert result.exit_code == 0, result.output
		assert '4^3 -> 8^3' in result.output
		assert (tmp_path / 'bench.tsv').read_text().startswith('size\tvoxels')
