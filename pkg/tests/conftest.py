"""
Test configuration for feformer.
"""

import logging
import os
import sys

import numpy as np
import pytest

# Ensure the source tree is importable without an install
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

from feformer.config import RunConfig
from feformer.model.views import ModelConfig

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))


@pytest.fixture
def rng():
	"""Seeded generator; every test draws its random inputs from here."""
	return np.random.default_rng(0)


@pytest.fixture
def tiny_model_config():
	"""Smallest model that still exercises every stage at 32^3."""
	return ModelConfig(C=4, depths=1, n_classes=3, seed=0)


@pytest.fixture
def toy_run_config(tmp_path, tiny_model_config):
	return RunConfig(
		model=tiny_model_config,
		steps=2,
		batch=1,
		n_phantoms=1,
		extent=32,
		eval_every=50,
		augment=True,
		output_dir=str(tmp_path / 'run'),
	)


@pytest.fixture
def toy_cfg_path():
	return os.path.join(ROOT, 'configs', 'toy.cfg')
