import math

import numpy as np
import pytest

from feformer.config import load_run_config
from feformer.exceptions import CheckpointError, ConfigError, ShapeError, TapeError
from feformer.harness.augment import augment, mirror, normalize_intensity, random_crop
from feformer.harness.metrics import dice_metric, hd95_metric, surface_mask
from feformer.harness.optim import adamw_step, init_optim_state, load_optim_state, poly_lr, save_optim_state
from feformer.harness.phantoms import paint_phantom, phantom_generate, rasterize_shape
from feformer.harness.service import evaluate, optim_path, predict, train_toy, write_history
from feformer.harness.views import HD95_FAILURE, HistoryRow, ShapeSpec, is_failure
from feformer.model.service import build_model
from feformer.nn.params import ParamStore
from feformer.tensor.service import Tape, backward, square, sum_


class TestPhantoms:
	def test_generate_is_deterministic(self):
		a, b = phantom_generate(3, 32, 3, 2), phantom_generate(3, 32, 3, 2)
		for pa, pb in zip(a, b):
			np.testing.assert_array_equal(pa.labels, pb.labels)
			np.testing.assert_array_equal(pa.volume, pb.volume)

	def test_every_class_is_painted(self):
		for phantom in phantom_generate(0, 32, 4, 3):
			assert phantom.volume.shape == (1, 1, 32, 32, 32)
			assert set(np.unique(phantom.labels)) == {0, 1, 2, 3}
			assert 0.0 <= phantom.volume.min() and phantom.volume.max() <= 1.0

	def test_sphere_volume(self):
		mask = rasterize_shape(ShapeSpec(kind='sphere', center=(16, 16, 16), size=8, class_id=1, intensity=1.0), 32)
		ideal = 4 / 3 * math.pi * 8**3
		assert abs(mask.sum() - ideal) / ideal < 0.05

	def test_tube_runs_along_its_axis(self):
		tube = ShapeSpec(kind='tube', center=(16, 16, 16), size=2, class_id=1, intensity=1.0, half_length=10, axis=0)
		mask = rasterize_shape(tube, 32)
		assert mask[6:27, 16, 16].all() and not mask[5, 16, 16] and not mask[27, 16, 16]

	def test_later_shapes_do_not_overwrite(self):
		first = ShapeSpec(kind='box', center=(8, 8, 8), size=3, class_id=1, intensity=0.6)
		second = ShapeSpec(kind='sphere', center=(10, 8, 8), size=3, class_id=2, intensity=1.0)
		phantom = paint_phantom([first, second], 16)
		assert phantom.labels[8, 8, 8] == 1
		assert phantom.labels[13, 8, 8] == 2

	def test_shape_that_does_not_fit(self):
		with pytest.raises(ShapeError):
			paint_phantom([ShapeSpec(kind='sphere', center=(1, 8, 8), size=3, class_id=1, intensity=1.0)], 16)
		with pytest.raises(ShapeError):
			phantom_generate(0, 32, 1, 1)


class TestAugment:
	def test_disabled_augmentation_is_identity(self):
		[phantom] = phantom_generate(0, 32, 3, 1)
		out = augment(phantom, 7, mirror_prob=0.0, noise_var_max=0.0, brightness_prob=0.0)
		np.testing.assert_array_equal(out.volume, phantom.volume)
		np.testing.assert_array_equal(out.labels, phantom.labels)

	def test_mirror_keeps_labels_aligned(self):
		[phantom] = phantom_generate(0, 32, 3, 1)
		out = augment(phantom, 7, mirror_prob=1.0, noise_var_max=0.0, brightness_prob=0.0)
		np.testing.assert_array_equal(out.labels, phantom.labels[::-1, ::-1, ::-1])
		np.testing.assert_array_equal(out.volume[0, 0], phantom.volume[0, 0, ::-1, ::-1, ::-1])

	def test_same_seed_same_sample(self):
		[phantom] = phantom_generate(0, 32, 3, 1)
		a, b, c = augment(phantom, 11), augment(phantom, 11), augment(phantom, 12)
		np.testing.assert_array_equal(a.volume, b.volume)
		assert not np.array_equal(a.volume, c.volume)

	def test_source_is_untouched(self):
		[phantom] = phantom_generate(0, 32, 3, 1)
		before = phantom.volume.copy()
		augment(phantom, 5, mirror_prob=0.0)
		mirror(phantom, ())
		np.testing.assert_array_equal(phantom.volume, before)

	def test_normalize_intensity(self, rng):
		out = normalize_intensity(rng.standard_normal((1, 1, 16, 16, 16)) * 3 + 10)
		assert abs(out.mean()) < 1e-10
		assert out.std() == pytest.approx(1.0)
		np.testing.assert_array_equal(normalize_intensity(np.full((4, 4, 4), 2.0)), np.zeros((4, 4, 4)))

	def test_random_crop(self, rng):
		[phantom] = phantom_generate(0, 32, 3, 1)
		crop = random_crop(phantom, 16, rng)
		assert crop.volume.shape == (1, 1, 16, 16, 16)
		assert crop.labels.shape == (16, 16, 16)
		with pytest.raises(ShapeError):
			random_crop(phantom, 40, rng)


class TestMetrics:
	def test_dice(self):
		pred = np.zeros((4, 4, 4), dtype=int)
		true = np.zeros((4, 4, 4), dtype=int)
		pred[0, 0, :2] = 1
		true[0, 0, 1:3] = 1
		assert dice_metric(pred, true, 1) == pytest.approx(50.0)
		assert dice_metric(pred, true, 2) == 100.0

	def test_hd95_single_voxels(self):
		pred = np.zeros((8, 8, 8), dtype=int)
		true = np.zeros((8, 8, 8), dtype=int)
		pred[0, 0, 0] = 1
		true[0, 0, 3] = 1
		assert hd95_metric(pred, true, 1) == pytest.approx(3.0)
		assert hd95_metric(pred, true, 1, spacing=(1.0, 1.0, 2.0)) == pytest.approx(6.0)
		assert hd95_metric(pred, true, 1, method='edt') == pytest.approx(3.0)

	def test_hd95_empty_masks(self):
		empty = np.zeros((4, 4, 4), dtype=int)
		full = np.ones((4, 4, 4), dtype=int)
		assert hd95_metric(empty, empty, 1) == 0.0
		assert hd95_metric(empty, full, 1) == HD95_FAILURE
		assert is_failure(hd95_metric(full, empty, 1))

	def test_identical_masks(self, rng):
		labels = (rng.random((8, 8, 8)) > 0.5).astype(int)
		assert hd95_metric(labels, labels, 1) == 0.0
		assert dice_metric(labels, labels, 1) == 100.0

	def test_surface_of_a_cube(self):
		mask = np.zeros((5, 5, 5), dtype=bool)
		mask[1:4, 1:4, 1:4] = True
		surface = surface_mask(mask)
		assert surface.sum() == 26
		assert not surface[2, 2, 2]

	def test_shape_mismatch(self):
		with pytest.raises(ShapeError):
			dice_metric(np.zeros((2, 2, 2)), np.zeros((2, 2, 3)), 1)


class TestOptim:
	def test_poly_lr(self):
		assert poly_lr(0, 100) == pytest.approx(1e-3)
		assert poly_lr(100, 100) == pytest.approx(3e-5)
		values = [poly_lr(t, 100) for t in range(101)]
		assert all(a >= b for a, b in zip(values, values[1:]))
		assert poly_lr(50, 100, 5e-5, 3e-6) == pytest.approx(3e-6 + (5e-5 - 3e-6) * 0.5**0.9)
		with pytest.raises(ConfigError):
			poly_lr(101, 100)

	def test_first_adamw_step_moves_by_lr(self, rng):
		store = ParamStore()
		w = store.param('w', (5,), 'zeros')
		w.data[...] = rng.standard_normal(5)
		start = w.data.copy()
		with Tape() as tape:
			loss = sum_(square(w))
		backward(loss, tape)
		state = init_optim_state(store, lr=0.1, weight_decay=0.0)
		adamw_step(store, state)
		np.testing.assert_allclose(w.data, start - 0.1 * np.sign(start), atol=1e-6)
		assert state.step == 1

	def test_decoupled_weight_decay(self):
		store = ParamStore()
		w = store.param('w', (3,), 'ones')
		w.grad = np.zeros(3)
		adamw_step(store, init_optim_state(store, lr=0.1, weight_decay=0.5))
		np.testing.assert_allclose(w.data, np.full(3, 0.95))

	def test_missing_gradient(self):
		store = ParamStore()
		store.param('w', (3,), 'ones')
		with pytest.raises(TapeError, match='no gradient'):
			adamw_step(store, init_optim_state(store))

	def test_state_file(self, tmp_path, rng):
		store = ParamStore()
		store.param('w', (2, 3), 'ones')
		state = init_optim_state(store, lr=0.01, weight_decay=0.02)
		state.m['w'][...] = rng.standard_normal((2, 3))
		state.step = 7
		loaded = load_optim_state(save_optim_state(state, tmp_path / 'state.opt'))
		assert (loaded.step, loaded.lr, loaded.weight_decay) == (7, 0.01, 0.02)
		np.testing.assert_array_equal(loaded.m['w'], state.m['w'])
		with pytest.raises(CheckpointError):
			load_optim_state(tmp_path / 'absent.opt')


class TestService:
	def test_write_history(self, tmp_path):
		rows = [HistoryRow(step=0, lr=1e-3, loss=1.5), HistoryRow(step=1, lr=5e-4, loss=1.25, dice={1: 40.0, 2: 60.0})]
		path = write_history(tmp_path / 'history.tsv', rows, 3)
		lines = path.read_text().splitlines()
		assert lines[0].split('\t') == ['step', 'lr', 'loss', 'dice_0', 'dice_1', 'dice_2']
		assert lines[1].split('\t')[3:] == ['', '', '']
		assert lines[2].split('\t')[4:] == ['40.0000', '60.0000']

	def test_predict_labels(self, rng, tiny_model_config):
		model = build_model(tiny_model_config)
		# eval-mode batch norm refuses untracked running statistics
		for name, buffer in model.store.buffers.items():
			if name.endswith('tracked'):
				buffer[...] = 1
		labels = predict(model, rng.standard_normal((32, 32, 32)))
		assert labels.shape == (1, 32, 32, 32)
		assert labels.min() >= 0 and labels.max() < 3

	def test_train_without_steps_writes_outputs(self, toy_run_config):
		phantoms = phantom_generate(0, 32, 3, 1)
		result = train_toy(toy_run_config, phantoms, steps=0)
		assert result.history == [] and result.evals == []
		assert toy_run_config.checkpoint_path.is_file()
		assert optim_path(toy_run_config.checkpoint_path).is_file()
		assert toy_run_config.history_path.read_text().startswith('step\tlr\tloss')

	def test_train_needs_phantoms(self, toy_run_config):
		with pytest.raises(ValueError):
			train_toy(toy_run_config, [])

	@pytest.mark.slow
	def test_train_is_deterministic(self, toy_run_config):
		phantoms = phantom_generate(0, 32, 3, 1)
		first = train_toy(toy_run_config, phantoms)
		second = train_toy(toy_run_config, phantoms)
		assert [row.loss for row in first.history] == [row.loss for row in second.history]
		assert len(first.evals) == 1 and first.history[-1].dice is not None
		assert all(np.isfinite(row.loss) for row in first.history)

	@pytest.mark.slow
	def test_resume_replays_the_same_step(self, toy_run_config, tmp_path):
		phantoms = phantom_generate(0, 32, 3, 1)
		full = train_toy(toy_run_config, phantoms, steps=2)

		toy_run_config.output_dir = str(tmp_path / 'resumed')
		partial = train_toy(toy_run_config, phantoms, steps=1)
		resumed = train_toy(toy_run_config, phantoms, steps=2, resume=partial.final_checkpoint)
		assert [row.step for row in resumed.history] == [1]
		assert resumed.history[0].loss == full.history[1].loss

	@pytest.mark.slow
	def test_toy_config_overfits(self, toy_cfg_path, tmp_path):
		cfg = load_run_config(toy_cfg_path)
		cfg.output_dir = str(tmp_path / 'toy')
		phantoms = phantom_generate(cfg.phantom_seed, cfg.extent, cfg.model.n_classes, cfg.n_phantoms)
		result = train_toy(cfg, phantoms)
		losses = [row.loss for row in result.history]
		assert len(losses) == cfg.steps and all(np.isfinite(losses))
		assert sum(b > a for a, b in zip(losses[:50], losses[1:50])) <= 5
		final = result.evals[-1]
		assert final.step == cfg.steps - 1
		assert final.mean_dice > 95.0, final
		assert final.mean_hd95 < 2.0, final

	@pytest.mark.slow
	def test_evaluate(self, toy_run_config):
		phantoms = phantom_generate(0, 32, 3, 1)
		train_toy(toy_run_config, phantoms, steps=1)
		from feformer.model.checkpoint import load_checkpoint

		result = evaluate(load_checkpoint(toy_run_config.checkpoint_path), phantoms, step=0)
		assert set(result.dice) == {1, 2}
		assert all(0.0 <= v <= 100.0 for v in result.dice.values())
