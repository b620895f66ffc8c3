import numpy as np

from feformer.exceptions import LabelError, ShapeError
from feformer.nn.service import log_softmax, softmax
from feformer.tensor.service import Tensor, add, div, mean, mul, neg, sub, sum_

DICE_EPS = 1e-5


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
	"""(B, D, H, W) integer labels -> (B, K, D, H, W) float indicator."""
	if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
		raise LabelError(f'labels must lie in [0, {n_classes}), found range [{labels.min()}, {labels.max()}]')
	return np.moveaxis(np.eye(n_classes, dtype=np.float64)[labels], -1, 1)


def seg_loss(logits: Tensor, labels: np.ndarray, eps: float = DICE_EPS) -> Tensor:
	"""Mean voxel cross-entropy plus soft Dice loss (1 - mean class Dice), pooled over the batch."""
	labels = np.asarray(labels)
	if labels.ndim == logits.ndim - 2:
		labels = labels[None]
	b, k = logits.shape[:2]
	if labels.shape != (b,) + logits.shape[2:]:
		raise ShapeError(f'labels of shape {labels.shape} do not match logits {logits.shape}')
	target = Tensor(one_hot(labels.astype(np.int64), k))
	reduce_axes = (0, 2, 3, 4)

	voxels = labels.size
	cross_entropy = mul(neg(sum_(mul(log_softmax(logits, axis=1), target))), 1.0 / voxels)

	probs = softmax(logits, axis=1)
	intersection = sum_(mul(probs, target), axis=reduce_axes)
	denominator = add(sum_(probs, axis=reduce_axes), Tensor(target.data.sum(axis=reduce_axes) + eps))
	dice = div(add(mul(intersection, 2.0), eps), denominator)
	return add(cross_entropy, sub(1.0, mean(dice)))
