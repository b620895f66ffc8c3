import logging

from feformer.blocks.baselines import concat_fuse_forward, make_concat_fuse, make_standard_attention, standard_attention_forward
from feformer.blocks.bridge import decoder_stem, encoder_stem, fcsb_forward, make_fcsb, make_stem
from feformer.blocks.fdsa import fdsa_forward, make_fdsa
from feformer.blocks.fgmlp import fgmlp_forward, make_fgmlp
from feformer.blocks.layers import conv, make_conv, make_layer_norm, norm
from feformer.blocks.views import BlockParams, ConcatFuseParams, RunMode, StageParams
from feformer.blocks.waff import make_waff, waff_forward
from feformer.exceptions import ShapeError
from feformer.model.views import DOWNSAMPLE, STAGE_NAMES, FEFormer, ForwardTrace, ModelConfig
from feformer.nn.params import ParamScope, ParamStore
from feformer.nn.views import ConvSpec
from feformer.tensor.service import Tensor, add, layer_scope
from feformer.utils import time_execution_sync

logger = logging.getLogger(__name__)

__all__ = ['build_model', 'block_forward', 'check_extents', 'model_forward', 'trace_shapes']


def _make_block(scope: ParamScope, channels: int, cfg: ModelConfig) -> BlockParams:
	norm1 = make_layer_norm(scope, 'norm1', channels)
	if cfg.attention == 'standard':
		attention = make_standard_attention(scope.scope('attention'), channels, cfg.num_heads)
	else:
		attention = make_fdsa(scope.scope('fdsa'), channels, cfg.cutoffs, recalibrate=cfg.attention == 'fdsa')
	norm2 = make_layer_norm(scope, 'norm2', channels)
	mlp = make_fgmlp(
		scope.scope('mlp'),
		channels,
		kind=cfg.mlp,
		ratio=cfg.mlp_ratio,
		k=cfg.lowpass_k,
		dropout_rate=cfg.dropout,
		gate=cfg.gate_activation,
		kernel_generator=cfg.kernel_generator,
	)
	return BlockParams(norm1=norm1, attention=attention, norm2=norm2, mlp=mlp, attention_kind=cfg.attention, mlp_kind=cfg.mlp)


@time_execution_sync('--build_model')
def build_model(cfg: ModelConfig, dry: bool = False) -> FEFormer:
	"""Create every parameter in data-flow order from one generator seeded with `cfg.seed`."""
	store = ParamStore(seed=cfg.seed, dry=dry)
	root = store.scope('')
	stem = make_stem(root.scope('stem'), cfg.in_channels, cfg.C, cfg.n_classes, cfg.upsample)
	bridge = make_fcsb(root.scope('bridge'), cfg.C, cfg.upsample) if cfg.stem_bridge else None

	widths = cfg.stage_channels()
	stages: dict[str, StageParams] = {}
	for name, channels, depth in zip(STAGE_NAMES, widths, cfg.depths):
		scope = root.scope(name)
		stage = StageParams()
		if name.startswith('decoder'):
			stage.expand = make_conv(scope, 'expand', ConvSpec(2 * channels, channels, kernel=2, stride=2, padding=0, transposed=True))
			if cfg.fusion == 'waff':
				stage.fusion = make_waff(scope.scope('waff'), shared=cfg.waff_shared)
			else:
				stage.fusion = make_concat_fuse(scope.scope('concat'), channels)
		stage.blocks = [_make_block(scope.scope(f'block{i}'), channels, cfg) for i in range(depth)]
		if name.startswith('encoder'):
			stage.merge = make_conv(scope, 'merge', ConvSpec(channels, 2 * channels, kernel=3, stride=2, padding=1))
			stage.merge_norm = make_layer_norm(scope, 'merge_norm', 2 * channels)
		stages[name] = stage

	model = FEFormer(config=cfg, store=store, stem=stem, bridge=bridge, stages=stages)
	logger.debug(f'built model with {store.num_learnable():,} learnable values (dry={dry})')
	return model


def block_forward(x: Tensor, p: BlockParams, mode: RunMode) -> Tensor:
	if p.attention_kind == 'standard':
		mixed = standard_attention_forward(norm(p.norm1, x), p.attention)
	else:
		mixed = fdsa_forward(norm(p.norm1, x), p.attention)
	x = add(x, mixed)
	return add(x, fgmlp_forward(norm(p.norm2, x), p.mlp, mode))


def _fuse(skip: Tensor, up: Tensor, stage: StageParams) -> Tensor:
	if isinstance(stage.fusion, ConcatFuseParams):
		return concat_fuse_forward(skip, up, stage.fusion)
	return waff_forward(skip, up, stage.fusion)


def _run_blocks(x: Tensor, name: str, stage: StageParams, mode: RunMode) -> Tensor:
	for i, block in enumerate(stage.blocks):
		with layer_scope(f'{name}.block{i}'):
			x = block_forward(x, block, mode)
	return x


def check_extents(extents) -> None:
	bad = [n for n in extents if n <= 0 or n % DOWNSAMPLE]
	if bad:
		raise ShapeError(f'spatial extents {tuple(extents)} must be positive multiples of {DOWNSAMPLE} (deepest stage is at 1/{DOWNSAMPLE})')


def model_forward(model: FEFormer, x: Tensor, mode: RunMode | None = None, trace: ForwardTrace | None = None) -> Tensor:
	"""Logits (B, n_classes, D, H, W) for input (B, in_channels, D, H, W)."""
	cfg = model.config
	mode = mode or RunMode(training=False)
	if x.ndim != 5 or x.shape[1] != cfg.in_channels:
		raise ShapeError(f'expected input (B, {cfg.in_channels}, D, H, W), got {x.shape}')
	check_extents(x.shape[-3:])
	expected = trace_shapes(cfg, x.shape[-3:]) if cfg.debug_shapes else None

	def seen(name: str, value: Tensor) -> None:
		if trace is not None:
			trace.record(name, value.shape)
		if expected is not None and tuple(value.shape[1:]) != expected[name]:
			raise ShapeError(f'{name} has shape {value.shape[1:]}, schedule expects {expected[name]}')

	x1, x2 = encoder_stem(x, model.stem, mode)
	seen('stem.x1', x1)
	seen('stem.x2', x2)

	skips = {}
	h = x2
	for name in STAGE_NAMES[:3]:
		stage = model.stages[name]
		h = _run_blocks(h, name, stage, mode)
		seen(name, h)
		skips[name] = h
		with layer_scope(f'{name}.merge'):
			h = norm(stage.merge_norm, conv(stage.merge, h))

	h = _run_blocks(h, 'bottleneck', model.stages['bottleneck'], mode)
	seen('bottleneck', h)

	for name in STAGE_NAMES[4:]:
		stage = model.stages[name]
		with layer_scope(f'{name}.expand'):
			h = _fuse(skips[name.replace('decoder', 'encoder')], conv(stage.expand, h), stage)
		h = _run_blocks(h, name, stage, mode)
		seen(name, h)

	x1_hat = x2_hat = None
	if model.bridge is not None:
		x1_hat, x2_hat = fcsb_forward(x1, x2, model.bridge, mode)
	logits = decoder_stem(h, x1_hat, x2_hat, model.stem, mode)
	seen('logits', logits)
	return logits


def trace_shapes(cfg: ModelConfig, extents) -> dict[str, tuple[int, ...]]:
	"""Per-sample (channels, D, H, W) at every stage boundary, by shape arithmetic alone."""
	check_extents(extents)
	down = ConvSpec(1, 1, kernel=3, stride=2, padding=1)
	up = ConvSpec(1, 1, kernel=2, stride=2, padding=0, transposed=True)
	stem_up = ConvSpec(1, 1, kernel=3, stride=2, padding=1, transposed=True, output_padding=1)

	spatial = tuple(down.output_extent(n) for n in extents)
	shapes = {'stem.x1': (cfg.C // 2,) + spatial}
	spatial = tuple(down.output_extent(n) for n in spatial)
	shapes['stem.x2'] = (cfg.C,) + spatial
	widths = cfg.stage_channels()
	for name, channels in zip(STAGE_NAMES[:3], widths[:3]):
		shapes[name] = (channels,) + spatial
		spatial = tuple(down.output_extent(n) for n in spatial)
	shapes['bottleneck'] = (widths[3],) + spatial
	for name, channels in zip(STAGE_NAMES[4:], widths[4:]):
		spatial = tuple(up.output_extent(n) for n in spatial)
		shapes[name] = (channels,) + spatial
	for _ in range(2):
		spatial = tuple(stem_up.output_extent(n) for n in spatial)
	shapes['logits'] = (cfg.n_classes,) + spatial
	return shapes
