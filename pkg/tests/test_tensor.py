import numpy as np
import pytest

from feformer.exceptions import NonFiniteError, ShapeError, TapeError
from feformer.spectral.service import fft3, ifft3, real_part
from feformer.tensor.gradcheck import finite_difference_check
from feformer.tensor.service import (
	Tape,
	Tensor,
	add,
	backward,
	exp,
	layer_scope,
	matmul,
	mean,
	mul,
	no_record,
	split,
	square,
	sum_,
)

# run with python -m pytest tests/test_tensor.py


class TestBackward:
	def test_square_sum_gradient(self, rng):
		x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
		with Tape() as tape:
			loss = sum_(square(x))
		backward(loss, tape)
		np.testing.assert_allclose(x.grad, 2 * x.data)

	def test_broadcast_add_reduces_gradient(self, rng):
		x = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
		b = Tensor(rng.standard_normal((3,)), requires_grad=True)
		with Tape() as tape:
			loss = sum_(add(x, b))
		backward(loss, tape)
		assert b.grad.shape == (3,)
		np.testing.assert_allclose(b.grad, np.full(3, 2.0))
		np.testing.assert_allclose(x.grad, np.ones((2, 3)))

	def test_reused_input_accumulates(self, rng):
		x = Tensor(rng.standard_normal(5), requires_grad=True)
		with Tape() as tape:
			loss = sum_(add(mul(x, 3.0), mul(x, x)))
		backward(loss, tape)
		np.testing.assert_allclose(x.grad, 3.0 + 2 * x.data)

	def test_mean_and_split(self, rng):
		x = Tensor(rng.standard_normal((4, 6)), requires_grad=True)
		with Tape() as tape:
			first, second = split(x, 2, axis=1)
			loss = add(mean(first), sum_(second))
		backward(loss, tape)
		np.testing.assert_allclose(x.grad[:, :3], np.full((4, 3), 1 / 12))
		np.testing.assert_allclose(x.grad[:, 3:], np.ones((4, 3)))

	def test_unreached_leaf_gets_zero_gradient(self, rng):
		x = Tensor(rng.standard_normal(3), requires_grad=True)
		y = Tensor(rng.standard_normal(3), requires_grad=True)
		with Tape() as tape:
			loss = sum_(x)
			_ = mul(y, 0.0)
		backward(loss, tape)
		np.testing.assert_array_equal(y.grad, np.zeros(3))

	def test_double_backward_is_rejected(self, rng):
		x = Tensor(rng.standard_normal(3), requires_grad=True)
		with Tape() as tape:
			loss = sum_(square(x))
		backward(loss, tape)
		with pytest.raises(TapeError):
			backward(loss, tape)
		with pytest.raises(TapeError):
			with tape:
				pass

	def test_non_scalar_loss_is_rejected(self, rng):
		x = Tensor(rng.standard_normal(3), requires_grad=True)
		with Tape() as tape:
			out = square(x)
		with pytest.raises(TapeError, match='scalar'):
			backward(out, tape)

	def test_detached_loss_is_rejected(self, rng):
		x = Tensor(rng.standard_normal(3), requires_grad=True)
		loss = sum_(square(x))
		with pytest.raises(TapeError, match='detached'):
			backward(loss, Tape())

	def test_no_record_records_nothing(self, rng):
		x = Tensor(rng.standard_normal(3), requires_grad=True)
		with Tape() as tape:
			with no_record():
				sum_(square(x))
		assert len(tape) == 0


class TestTensor:
	def test_matmul(self, rng):
		a, b = rng.standard_normal((2, 3, 4)), rng.standard_normal((2, 4, 5))
		np.testing.assert_allclose(matmul(Tensor(a), Tensor(b)).data, a @ b)

	def test_item_needs_single_value(self):
		assert Tensor([[2.5]]).item() == 2.5
		with pytest.raises(ShapeError):
			Tensor([1.0, 2.0]).item()

	def test_operators(self, rng):
		a, b = rng.standard_normal(4), rng.standard_normal(4) + 3.0
		x, y = Tensor(a), Tensor(b)
		np.testing.assert_allclose((x + y).data, a + b)
		np.testing.assert_allclose((x - y).data, a - b)
		np.testing.assert_allclose((x * y).data, a * b)
		np.testing.assert_allclose((x / y).data, a / b)
		np.testing.assert_allclose((-x).data, -a)

	def test_non_finite_names_the_layer(self):
		with np.errstate(all='ignore'):
			with layer_scope('stage'):
				with layer_scope('probe'):
					with pytest.raises(NonFiniteError) as info:
						exp(Tensor([1000.0]))
		assert info.value.layer == 'stage.probe'
		assert 'stage.probe' in str(info.value)


class TestFiniteDifference:
	def test_product(self, rng):
		x, y = Tensor(rng.standard_normal((2, 3))), Tensor(rng.standard_normal((2, 3)))
		report = finite_difference_check(lambda a, b: sum_(mul(mul(a, a), b)), [x, y], tol=1e-6)
		assert report.passed, report.describe()
		assert report.coordinates_checked == 12

	def test_through_the_fourier_transform(self, rng):
		x = Tensor(rng.standard_normal((1, 1, 4, 4, 4)))
		report = finite_difference_check(lambda a: sum_(square(real_part(fft3(a)))), [x], tol=1e-6)
		assert report.passed, report.describe()

	def test_spectral_product_gradient(self, rng):
		x, y = Tensor(rng.standard_normal((1, 2, 4, 4, 4))), Tensor(rng.standard_normal((1, 2, 4, 4, 4)))
		weights = Tensor(rng.standard_normal((1, 2, 4, 4, 4)))
		report = finite_difference_check(lambda a, b: sum_(mul(ifft3(mul(fft3(a), fft3(b))), weights)), [x, y], tol=1e-6)
		assert report.passed, report.describe()

	def test_sampled_coordinates(self, rng):
		x = Tensor(rng.standard_normal((4, 4)))
		report = finite_difference_check(lambda a: sum_(square(a)), [x], max_coordinates=5, rng=rng)
		assert report.coordinates_checked == 5

	def test_wrong_gradient_fails(self, rng):
		from feformer.tensor.service import apply_op

		def broken_square(a):
			return apply_op('broken', a.data**2, (a,), lambda g: (g * a.data,))

		x = Tensor(rng.standard_normal(4) + 2.0)
		report = finite_difference_check(lambda a: sum_(broken_square(a)), [x])
		assert not report.passed
		assert 'FAIL' in report.describe()

	def test_non_finite_input_is_rejected(self):
		with pytest.raises(NonFiniteError):
			finite_difference_check(lambda a: sum_(a), [Tensor([np.nan])])
