from feformer.logging_config import setup_logging

setup_logging()

from feformer.config import RunConfig as RunConfig
from feformer.harness.service import train_toy as train_toy
from feformer.model.service import build_model as build_model
from feformer.model.service import model_forward as model_forward
from feformer.model.views import FEFormer as FEFormer
from feformer.model.views import ModelConfig as ModelConfig
from feformer.tensor.service import Tape as Tape
from feformer.tensor.service import Tensor as Tensor
from feformer.tensor.service import backward as backward

__version__ = '0.1.0'

__all__ = [
	'FEFormer',
	'ModelConfig',
	'RunConfig',
	'Tape',
	'Tensor',
	'backward',
	'build_model',
	'model_forward',
	'train_toy',
]
