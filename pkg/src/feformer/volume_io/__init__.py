from feformer.volume_io.service import header_for, read_volume, write_volume
from feformer.volume_io.views import MAGIC, VolumeHeader

__all__ = ['MAGIC', 'VolumeHeader', 'header_for', 'read_volume', 'write_volume']
