import numpy as np
import pytest

from feformer.exceptions import VolumeFormatError
from feformer.volume_io.service import header_for, read_volume, write_volume
from feformer.volume_io.views import VolumeHeader


def test_float_volume_round_trip(tmp_path, rng):
	data = rng.standard_normal((2, 4, 6, 8))
	header = header_for(data, spacing=(1.0, 0.5, 2.0))
	path = write_volume(tmp_path / 'image.vol', header, data)
	loaded_header, loaded = read_volume(path)
	assert loaded_header == header
	assert loaded_header.channels == 2 and loaded_header.extents == (4, 6, 8)
	np.testing.assert_array_equal(loaded, data)


def test_label_volume(tmp_path, rng):
	labels = rng.integers(0, 5, (4, 4, 4))
	header = header_for(labels)
	assert header.dtype == 'u8'
	_, loaded = read_volume(write_volume(tmp_path / 'labels.vol', header, labels))
	assert loaded.dtype == np.uint8
	np.testing.assert_array_equal(loaded[0], labels)


def test_single_precision(tmp_path, rng):
	data = rng.standard_normal((4, 4, 4))
	_, loaded = read_volume(write_volume(tmp_path / 'f32.vol', header_for(data, dtype='f32'), data))
	np.testing.assert_allclose(loaded[0], data, rtol=1e-6)


def test_header_is_plain_text(tmp_path):
	data = np.zeros((2, 2, 2))
	path = write_volume(tmp_path / 'zeros.vol', header_for(data), data)
	head = path.read_bytes().split(b'\n\n', 1)[0].decode('ascii')
	assert head.splitlines() == ['VOL1', 'dtype=f64', 'extents=2,2,2', 'spacing=1.0,1.0,1.0', 'channels=1']


class TestMalformed:
	def test_missing_file(self, tmp_path):
		with pytest.raises(VolumeFormatError, match='does not exist'):
			read_volume(tmp_path / 'absent.vol')

	def test_bad_magic(self, tmp_path):
		path = tmp_path / 'bad.vol'
		path.write_bytes(b'VOL9\ndtype=f64\n\n')
		with pytest.raises(VolumeFormatError, match='bad magic'):
			read_volume(path)

	def test_unterminated_header(self, tmp_path):
		path = tmp_path / 'open.vol'
		path.write_bytes(b'VOL1\ndtype=f64\nextents=2,2,2\n')
		with pytest.raises(VolumeFormatError, match='blank line'):
			read_volume(path)

	def test_truncated_payload(self, tmp_path):
		data = np.ones((2, 2, 2))
		path = write_volume(tmp_path / 'cut.vol', header_for(data), data)
		path.write_bytes(path.read_bytes()[:-8])
		with pytest.raises(VolumeFormatError, match='expected 64 payload bytes, found 56'):
			read_volume(path)

	def test_invalid_field(self, tmp_path):
		path = tmp_path / 'negative.vol'
		path.write_bytes(b'VOL1\ndtype=f64\nextents=2,-2,2\nspacing=1,1,1\nchannels=1\n\n')
		with pytest.raises(VolumeFormatError, match='extents'):
			read_volume(path)

	def test_unknown_dtype(self, tmp_path):
		path = tmp_path / 'dtype.vol'
		path.write_bytes(b'VOL1\ndtype=i16\nextents=2,2,2\nspacing=1,1,1\nchannels=1\n\n')
		with pytest.raises(VolumeFormatError, match='dtype'):
			read_volume(path)

	def test_write_checks_the_data(self, tmp_path):
		header = VolumeHeader(dtype='u8', extents=(2, 2, 2))
		with pytest.raises(VolumeFormatError, match='integer labels'):
			write_volume(tmp_path / 'x.vol', header, np.zeros((2, 2, 2)))
		with pytest.raises(VolumeFormatError, match='fit in u8'):
			write_volume(tmp_path / 'x.vol', header, np.full((2, 2, 2), 300))
		with pytest.raises(VolumeFormatError, match='describes'):
			write_volume(tmp_path / 'x.vol', header, np.zeros((3, 3, 3), dtype=int))
		with pytest.raises(VolumeFormatError):
			header_for(np.zeros((2, 2)))
