from feformer.blocks.baselines import concat_fuse_forward, standard_attention_forward
from feformer.blocks.bridge import decoder_stem, encoder_stem, fcsb_forward
from feformer.blocks.fdsa import fdsa_forward, freq_attention_scores, multi_freq_recalibrate
from feformer.blocks.fgmlp import dynamic_lowpass_kernels, fgmlp_forward, frequency_select_modulate
from feformer.blocks.views import RunMode
from feformer.blocks.waff import fuse_subband_pair, waff_forward

__all__ = [
	'RunMode',
	'concat_fuse_forward',
	'decoder_stem',
	'dynamic_lowpass_kernels',
	'encoder_stem',
	'fcsb_forward',
	'fdsa_forward',
	'fgmlp_forward',
	'freq_attention_scores',
	'frequency_select_modulate',
	'fuse_subband_pair',
	'multi_freq_recalibrate',
	'standard_attention_forward',
	'waff_forward',
]
