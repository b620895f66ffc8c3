import logging

import pytest

from feformer.config import load_run_config, num_threads, run_config_from_text
from feformer.exceptions import ConfigError
from feformer.keyvalue import format_key_values, parse_key_values


class TestKeyValue:
	def test_parse(self):
		values = parse_key_values('# comment\na=1\n\nb = x, y  # trailing\nc=none\n')
		assert values == {'a': '1', 'b': ['x', 'y'], 'c': None}

	def test_malformed_line(self):
		with pytest.raises(ConfigError, match=':2: expected key=value'):
			parse_key_values('a=1\njust words\n', source='run.cfg')

	def test_duplicate_key(self):
		with pytest.raises(ConfigError, match='duplicate key'):
			parse_key_values('a=1\na=2\n')

	def test_format(self):
		assert format_key_values({'flag': True, 'xs': (1, 2), 'none': None, 'f': 0.5}) == 'flag=true\nxs=1,2\nnone=none\nf=0.5\n'


class TestRunConfig:
	def test_toy_config(self, toy_cfg_path):
		cfg = load_run_config(toy_cfg_path)
		assert cfg.model.C == 8 and cfg.model.depths == [1] * 7 and cfg.model.n_classes == 3
		assert cfg.extent == 32 and cfg.steps == 300
		assert cfg.learning_rates() == (5e-3, 1e-4)
		assert cfg.batch == cfg.n_phantoms == 4
		assert not cfg.augment
		assert str(cfg.checkpoint_path).endswith('model.fef')

	def test_defaults(self):
		cfg = run_config_from_text('')
		assert cfg.model.C == 64
		assert cfg.augment and not cfg.normalize

	def test_brain_preset_and_overrides(self):
		assert run_config_from_text('lr_preset=brain').learning_rates() == (5e-5, 3e-6)
		assert run_config_from_text('lr_preset=brain\nlr0=1e-4').learning_rates() == (1e-4, 3e-6)

	@pytest.mark.parametrize('text', ['bogus=1', 'model.width=3'])
	def test_unknown_key(self, text):
		with pytest.raises(ConfigError, match='unknown config key') as info:
			run_config_from_text(text)
		assert info.value.exit_code == 2

	@pytest.mark.parametrize('text', ['steps=-1', 'extent=16', 'model.C=6', 'lr_preset=skin', 'augment=maybe'])
	def test_invalid_value(self, text):
		with pytest.raises(ConfigError, match='invalid value'):
			run_config_from_text(text, source='run.cfg')

	def test_missing_file(self, tmp_path):
		with pytest.raises(ConfigError, match='does not exist'):
			load_run_config(tmp_path / 'absent.cfg')

	def test_num_threads(self, monkeypatch):
		monkeypatch.setenv('FEFORMER_NUM_THREADS', '3')
		assert num_threads() == 3
		monkeypatch.setenv('FEFORMER_NUM_THREADS', '0')
		assert num_threads() == 1


def test_result_log_level():
	assert logging.getLevelName(35) == 'RESULT'
	assert hasattr(logging.getLogger('feformer'), 'result')
