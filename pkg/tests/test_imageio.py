import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcadp import imageio
from pcadp.errors import CodecError, FormatError, HeterogeneityError, RejectedInput
from synthdata import make_database, write_idx_images, write_idx_labels


def random_image(rng, width=8, height=8, channels=1):
    return imageio.Image(
        width=width,
        height=height,
        channels=channels,
        pixels=rng.integers(0, 256, size=width * height * channels, dtype=np.uint8),
    )


class TestImageType:
    def test_bad_channels(self):
        with pytest.raises(RejectedInput):
            imageio.Image(width=2, height=2, channels=2, pixels=np.zeros(8, dtype=np.uint8))

    def test_length_mismatch(self):
        with pytest.raises(RejectedInput):
            imageio.Image(width=2, height=2, channels=1, pixels=np.zeros(3, dtype=np.uint8))

    def test_float_pixels_rejected(self):
        with pytest.raises(RejectedInput):
            imageio.Image(width=1, height=1, channels=1, pixels=np.array([0.5]))

    def test_out_of_range_rejected(self):
        with pytest.raises(RejectedInput):
            imageio.Image(width=1, height=1, channels=1, pixels=np.array([256]))

    def test_pixels_read_only(self):
        img = random_image(np.random.default_rng(0))
        with pytest.raises(ValueError):
            img.pixels[0] = 1


class TestDatabaseType:
    def test_label_count_mismatch(self):
        img = random_image(np.random.default_rng(0))
        with pytest.raises(RejectedInput):
            imageio.ImageDatabase(images=(img,), labels=(0, 1), class_names=("a", "b"))

    def test_heterogeneous_shapes(self):
        rng = np.random.default_rng(0)
        with pytest.raises(HeterogeneityError):
            imageio.ImageDatabase(
                images=(random_image(rng, 8, 8), random_image(rng, 4, 4)),
                labels=(0, 0),
                class_names=("a",),
            )

    def test_empty_rejected(self):
        with pytest.raises(RejectedInput):
            imageio.ImageDatabase(images=(), labels=(), class_names=())

    def test_label_out_of_range(self):
        img = random_image(np.random.default_rng(0))
        with pytest.raises(RejectedInput):
            imageio.ImageDatabase(images=(img,), labels=(1,), class_names=("a",))


class TestFlatten:
    def test_row_major_order(self):
        img = imageio.Image(width=2, height=2, channels=1, pixels=np.array([1, 2, 3, 4], dtype=np.uint8))
        assert np.array_equal(imageio.flatten(img), [1.0, 2.0, 3.0, 4.0])

    def test_grayscale_length(self):
        img = random_image(np.random.default_rng(0), 28, 28)
        assert imageio.flatten(img).shape == (784,)

    def test_color_length(self):
        img = random_image(np.random.default_rng(0), 80, 80, 3)
        assert imageio.flatten(img).shape == (19200,)

    def test_clamp_and_round(self):
        img = imageio.unflatten([255.7, -3.2, 127.5, 0.4], 2, 2)
        assert list(img.pixels) == [255, 0, 128, 0]

    def test_unflatten_length_mismatch(self):
        with pytest.raises(RejectedInput):
            imageio.unflatten([1.0, 2.0, 3.0], 2, 2)

    def test_unflatten_rejects_nan(self):
        with pytest.raises(RejectedInput):
            imageio.unflatten([np.nan, 0.0, 0.0, 0.0], 2, 2)

    @given(st.integers(1, 6), st.integers(1, 6), st.sampled_from([1, 3]), st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_roundtrip_identity(self, w, h, c, seed):
        img = random_image(np.random.default_rng(seed), w, h, c)
        back = imageio.unflatten(imageio.flatten(img), w, h, c)
        assert np.array_equal(back.pixels, img.pixels)


class TestNetpbm:
    def test_minimal_pgm_bytes(self, tmp_path):
        img = imageio.Image(width=1, height=1, channels=1, pixels=np.array([0], dtype=np.uint8))
        path = tmp_path / "min.pgm"
        imageio.save_pgm(img, path)
        assert path.read_bytes() == b"P5\n1 1\n255\n\x00"

    def test_pgm_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        img = random_image(rng, 8, 8)
        imageio.save_pgm(img, tmp_path / "x.pgm")
        back = imageio.load_pgm(tmp_path / "x.pgm")
        assert back.shape == img.shape
        assert np.array_equal(back.pixels, img.pixels)

    def test_ppm_roundtrip(self, tmp_path):
        rng = np.random.default_rng(2)
        img = random_image(rng, 5, 7, 3)
        imageio.save_ppm(img, tmp_path / "x.ppm")
        back = imageio.load_ppm(tmp_path / "x.ppm")
        assert back.shape == img.shape
        assert np.array_equal(back.pixels, img.pixels)

    def test_ppm_on_disk_is_interleaved(self, tmp_path):
        pixels = np.array([1, 2, 3, 4, 5, 6], dtype=np.uint8)  # planar R=[1,2] G=[3,4] B=[5,6]
        img = imageio.Image(width=2, height=1, channels=3, pixels=pixels)
        imageio.save_ppm(img, tmp_path / "x.ppm")
        payload = (tmp_path / "x.ppm").read_bytes().split(b"255\n", 1)[1]
        assert payload == bytes([1, 3, 5, 2, 4, 6])

    def test_channel_format_mismatch(self, tmp_path):
        gray = random_image(np.random.default_rng(0), 2, 2, 1)
        color = random_image(np.random.default_rng(0), 2, 2, 3)
        with pytest.raises(FormatError):
            imageio.save_ppm(gray, tmp_path / "x.ppm")
        with pytest.raises(FormatError):
            imageio.save_pgm(color, tmp_path / "x.pgm")

    def test_load_pgm_rejects_ppm(self, tmp_path):
        img = random_image(np.random.default_rng(0), 2, 2, 3)
        imageio.save_ppm(img, tmp_path / "x.ppm")
        with pytest.raises(FormatError):
            imageio.load_pgm(tmp_path / "x.ppm")

    def test_header_comments_accepted(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# a comment\n2 1\n# another\n255\n\x01\x02")
        img = imageio.load_pgm(path)
        assert (img.width, img.height) == (2, 1)
        assert list(img.pixels) == [1, 2]

    def test_bad_maxval_rejected(self, tmp_path):
        path = tmp_path / "m.pgm"
        path.write_bytes(b"P5\n1 1\n65535\n\x00\x00")
        with pytest.raises(FormatError):
            imageio.load_pgm(path)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n2 2\n255\n\x00\x00")
        with pytest.raises(FormatError) as exc_info:
            imageio.load_pgm(path)
        assert exc_info.value.field == "pixel data"

    def test_unknown_magic_rejected(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P3\n1 1\n255\n0 0 0")
        with pytest.raises(FormatError):
            imageio.load_image(path)


class TestIdx:
    @pytest.fixture()
    def idx_pair(self, tmp_path):
        db = make_database(20, seed=9)
        images_path = tmp_path / "images.idx"
        labels_path = tmp_path / "labels.idx"
        write_idx_images(db, images_path)
        write_idx_labels(db, labels_path)
        return db, images_path, labels_path

    def test_load_matches_source(self, idx_pair):
        db, images_path, labels_path = idx_pair
        loaded = imageio.load_idx(images_path, labels_path)
        assert loaded.n == db.n
        assert loaded.labels == db.labels
        assert (loaded.width, loaded.height, loaded.channels) == (28, 28, 1)
        for a, b in zip(loaded.images, db.images):
            assert np.array_equal(a.pixels, b.pixels)

    def test_wrong_magic_for_labels(self, idx_pair):
        _, images_path, _ = idx_pair
        with pytest.raises(FormatError) as exc_info:
            imageio.load_idx(images_path, images_path)
        assert exc_info.value.field == "magic"
        assert exc_info.value.offset == 0

    def test_count_mismatch(self, idx_pair, tmp_path):
        db, images_path, _ = idx_pair
        short = make_database(19, seed=9)
        bad_labels = tmp_path / "short.idx"
        write_idx_labels(short, bad_labels)
        with pytest.raises(FormatError) as exc_info:
            imageio.load_idx(images_path, bad_labels)
        assert exc_info.value.field == "count"

    def test_truncated_pixels(self, idx_pair, tmp_path):
        _, images_path, labels_path = idx_pair
        data = images_path.read_bytes()
        clipped = tmp_path / "clip.idx"
        clipped.write_bytes(data[:-5])
        with pytest.raises(FormatError) as exc_info:
            imageio.load_idx(clipped, labels_path)
        assert "truncated" in str(exc_info.value)

    def test_label_out_of_range(self, idx_pair, tmp_path):
        _, images_path, labels_path = idx_pair
        data = bytearray(labels_path.read_bytes())
        data[8 + 3] = 17
        bad = tmp_path / "bad.idx"
        bad.write_bytes(bytes(data))
        with pytest.raises(FormatError) as exc_info:
            imageio.load_idx(images_path, bad)
        assert exc_info.value.offset == 8 + 3


class TestImageDir:
    def _write_dir(self, tmp_path, images, labels):
        lines = []
        for i, (img, label) in enumerate(zip(images, labels)):
            name = f"img_{i:03d}.pgm" if img.channels == 1 else f"img_{i:03d}.ppm"
            imageio.save_image(img, tmp_path / name)
            lines.append(f"{name},{label}")
        manifest = tmp_path / "labels.csv"
        manifest.write_text("\n".join(lines) + "\n")
        return manifest

    def test_basic_load_and_order(self, tmp_path):
        rng = np.random.default_rng(0)
        images = [random_image(rng, 4, 4) for _ in range(4)]
        manifest = self._write_dir(tmp_path, images, ["b", "a", "b", "a"])
        db = imageio.load_image_dir(tmp_path, manifest)
        assert db.n == 4
        assert db.class_names == ("a", "b")
        assert db.labels == (1, 0, 1, 0)
        assert np.array_equal(db.images[2].pixels, images[2].pixels)

    def test_order_is_lexicographic_not_manifest_order(self, tmp_path):
        rng = np.random.default_rng(1)
        images = [random_image(rng, 4, 4) for _ in range(3)]
        for i, img in enumerate(images):
            imageio.save_pgm(img, tmp_path / f"img_{i}.pgm")
        manifest = tmp_path / "m.csv"
        manifest.write_text("img_2.pgm,x\nimg_0.pgm,x\nimg_1.pgm,x\n")
        db = imageio.load_image_dir(tmp_path, manifest)
        assert np.array_equal(db.images[0].pixels, images[0].pixels)
        assert np.array_equal(db.images[2].pixels, images[2].pixels)

    def test_mixed_dimensions(self, tmp_path):
        rng = np.random.default_rng(2)
        images = [random_image(rng, 4, 4), random_image(rng, 5, 5)]
        manifest = self._write_dir(tmp_path, images, ["a", "a"])
        with pytest.raises(HeterogeneityError) as exc_info:
            imageio.load_image_dir(tmp_path, manifest)
        assert "img_001.pgm" in exc_info.value.offenders

    def test_undecodable_file(self, tmp_path):
        (tmp_path / "junk.pgm").write_bytes(b"not an image")
        manifest = tmp_path / "m.csv"
        manifest.write_text("junk.pgm,a\n")
        with pytest.raises(CodecError) as exc_info:
            imageio.load_image_dir(tmp_path, manifest)
        assert "junk.pgm" in str(exc_info.value)

    def test_duplicate_entry(self, tmp_path):
        rng = np.random.default_rng(3)
        imageio.save_pgm(random_image(rng, 4, 4), tmp_path / "a.pgm")
        manifest = tmp_path / "m.csv"
        manifest.write_text("a.pgm,x\na.pgm,y\n")
        with pytest.raises(FormatError):
            imageio.load_image_dir(tmp_path, manifest)

    def test_bad_manifest_line(self, tmp_path):
        manifest = tmp_path / "m.csv"
        manifest.write_text("no-comma-here\n")
        with pytest.raises(FormatError):
            imageio.load_image_dir(tmp_path, manifest)

    def test_resize_applied(self, tmp_path):
        rng = np.random.default_rng(4)
        images = [random_image(rng, 8, 8), random_image(rng, 8, 8)]
        manifest = self._write_dir(tmp_path, images, ["a", "b"])
        db = imageio.load_image_dir(tmp_path, manifest, resize=(4, 4))
        assert (db.width, db.height) == (4, 4)


class TestResize:
    def test_downsample_by_two(self):
        pixels = np.arange(16, dtype=np.uint8)
        img = imageio.Image(width=4, height=4, channels=1, pixels=pixels)
        small = imageio.resize_nearest(img, 2, 2)
        assert np.array_equal(small.plane(0), [[0, 2], [8, 10]])

    def test_identity_size(self):
        img = random_image(np.random.default_rng(0), 5, 3)
        same = imageio.resize_nearest(img, 5, 3)
        assert np.array_equal(same.pixels, img.pixels)
