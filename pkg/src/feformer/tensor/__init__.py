from feformer.tensor.gradcheck import finite_difference_check
from feformer.tensor.service import (
	ComplexTensor,
	Tape,
	Tensor,
	active_tape,
	add,
	amax,
	apply_op,
	as_tensor,
	backward,
	concat,
	current_scope,
	div,
	exp,
	getitem,
	identity,
	layer_scope,
	log,
	matmul,
	mean,
	mul,
	neg,
	no_record,
	real_dtype,
	reshape,
	set_precision,
	split,
	square,
	sub,
	sum_,
	transpose,
)
from feformer.tensor.views import GradCheckReport, TapeNode

__all__ = [
	'ComplexTensor',
	'GradCheckReport',
	'Tape',
	'TapeNode',
	'Tensor',
	'active_tape',
	'add',
	'amax',
	'apply_op',
	'as_tensor',
	'backward',
	'concat',
	'current_scope',
	'div',
	'exp',
	'finite_difference_check',
	'getitem',
	'identity',
	'layer_scope',
	'log',
	'matmul',
	'mean',
	'mul',
	'neg',
	'no_record',
	'real_dtype',
	'reshape',
	'set_precision',
	'split',
	'square',
	'sub',
	'sum_',
	'transpose',
]
