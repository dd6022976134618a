import numpy as np
import pytest
from PIL import Image

from mricnn import dataset as ds
from mricnn.errors import ConfigurationError, ContractError, FormatError
from mricnn.imageio import decode_pgm, encode_pgm, read_image, write_pgm


class TestPgm:
    def test_header_layout(self):
        data = encode_pgm(np.array([[0, 255, 7]]))
        assert data == b"P5\n3 1\n255\n\x00\xff\x07"

    def test_round_trip(self, rng):
        img = rng.integers(0, 256, size=(5, 7)).astype(float)
        np.testing.assert_array_equal(decode_pgm(encode_pgm(img)), img)

    def test_comments_and_16_bit(self):
        raw = b"P5\n# made by hand\n2 1\n65535\n" + np.array([0, 65535], dtype=">u2").tobytes()
        assert decode_pgm(raw).tolist() == [[0.0, 255.0]]

    def test_truncated(self):
        with pytest.raises(FormatError):
            decode_pgm(b"P5\n4 4\n255\n\x00\x01")
        with pytest.raises(FormatError):
            decode_pgm(b"P5\n4")

    def test_wrong_magic(self):
        with pytest.raises(FormatError):
            decode_pgm(b"P2\n1 1\n255\n0")

    def test_write_clamps_and_rounds(self, tmp_path):
        write_pgm(tmp_path / "a.pgm", np.array([[-3.0, 12.6, 300.0]]))
        assert read_image(tmp_path / "a.pgm").tolist() == [[0.0, 13.0, 255.0]]


class TestPng:
    def test_grayscale(self, tmp_path):
        Image.fromarray(np.array([[0, 10], [200, 255]], dtype=np.uint8), "L").save(tmp_path / "g.png")
        assert read_image(tmp_path / "g.png").tolist() == [[0, 10], [200, 255]]

    def test_rgb_uses_luminance(self, tmp_path):
        rgb = np.array([[[255, 0, 0], [0, 255, 0], [0, 0, 255], [10, 20, 30]]], dtype=np.uint8)
        Image.fromarray(rgb, "RGB").save(tmp_path / "c.png")
        np.testing.assert_allclose(read_image(tmp_path / "c.png")[0], [76.245, 149.685, 29.07, 0.299 * 10 + 0.587 * 20 + 0.114 * 30])

    def test_garbage(self, tmp_path):
        (tmp_path / "x.png").write_bytes(b"not a png")
        with pytest.raises(FormatError):
            read_image(tmp_path / "x.png")

    def test_unsupported_suffix_hint(self, tmp_path):
        with pytest.raises(FormatError, match="convert"):
            read_image(tmp_path / "a.jpg")


class TestLoadDirectory:
    def test_one_per_class(self, tmp_path):
        for i, name in enumerate(ds.CLASS_NAMES):
            (tmp_path / name).mkdir()
            write_pgm(tmp_path / name / "a.pgm", np.full((3, 4), i * 10.0))
        samples = ds.load_directory(tmp_path)
        assert [s.label for s in samples] == [0, 1, 2, 3]
        assert samples[2].pixels[0, 0] == 20

    def test_empty_root(self, tmp_path):
        with pytest.raises(ConfigurationError, match="found: nothing"):
            ds.load_directory(tmp_path)

    def test_missing_class_named(self, tmp_path):
        for name in ds.CLASS_NAMES[:3]:
            (tmp_path / name).mkdir()
        with pytest.raises(ConfigurationError, match="moderate"):
            ds.load_directory(tmp_path)

    def test_deterministic_order_and_skips(self, tiny_dir):
        (tiny_dir / "mild" / "broken.pgm").write_bytes(b"P5\n9 9\n255\n")
        (tiny_dir / "mild" / "notes.txt").write_text("ignored")
        skipped = []
        a = ds.load_directory(tiny_dir, skipped)
        b = ds.load_directory(tiny_dir)
        assert [s.source_path for s in a] == [s.source_path for s in b]
        for label in range(4):
            paths = [s.source_path for s in a if s.label == label]
            assert paths == sorted(paths)
        assert [s.label for s in a] == sorted(s.label for s in a)
        assert len(a) == 10 and len(skipped) == 1 and skipped[0][0].endswith("broken.pgm")


class TestResize:
    def test_same_size_noop(self, rng):
        img = rng.uniform(0, 255, size=(176, 208))
        assert np.abs(ds.resize(img) - img).max() == 0

    def test_constant_upsample(self):
        out = ds.resize(np.full((88, 104), 93.0))
        assert out.shape == (176, 208) and np.all(out == 93.0)

    def test_checkerboard_downsample_keeps_mean(self):
        yy, xx = np.mgrid[0:352, 0:416]
        board = np.where((yy // 3 + xx // 5) % 2 == 0, 255.0, 0.0)
        out = ds.resize(board)
        assert out.shape == (176, 208)
        # 2x2 box average oracle
        box = board.reshape(176, 2, 208, 2).mean(axis=(1, 3))
        np.testing.assert_allclose(out, box)
        assert abs(out.mean() - board.mean()) <= 1 / 255

    def test_arbitrary_sizes(self, rng):
        out = ds.resize(rng.uniform(0, 255, size=(7, 300)), (176, 208))
        assert out.shape == (176, 208) and out.min() >= 0 and out.max() <= 255


def labelled(counts):
    return [ds.ImageSample(np.full((2, 2), float(i)), c) for c, k in enumerate(counts) for i in range(k)]


class TestSplit:
    @pytest.mark.parametrize("n,expected", [(100, (60, 20, 20)), (10, (6, 2, 2)), (5, (3, 1, 1)), (7, (5, 1, 1))])
    def test_per_class_sizes(self, n, expected):
        parts = ds.split(labelled([n] * 4), seed=3)
        for c in range(4):
            got = tuple(sum(s.label == c for s in p) for p in (parts.train, parts.validation, parts.test))
            assert got == expected

    def test_partition(self):
        src = labelled([13, 7, 9, 21])
        parts = ds.split(src, seed=1)
        ids = [id(s) for p in (parts.train, parts.validation, parts.test) for s in p]
        assert sorted(ids) == sorted(id(s) for s in src)
        assert len(set(ids)) == len(ids)

    def test_seeded(self):
        src = labelled([10] * 4)
        a, b, c = ds.split(src, seed=4), ds.split(src, seed=4), ds.split(src, seed=5)
        assert [id(s) for s in a.test] == [id(s) for s in b.test]
        assert [id(s) for s in a.test] != [id(s) for s in c.test]

    def test_empty_class(self):
        with pytest.raises(ConfigurationError):
            ds.split(labelled([3, 3, 0, 3]))


class TestOneHotAndBatches:
    def test_one_hot(self):
        assert ds.one_hot([2]).tolist() == [[0, 0, 1, 0]]
        oh = ds.one_hot([0, 3, 1, 1])
        assert np.all(oh.sum(axis=1) == 1)
        assert oh.argmax(axis=1).tolist() == [0, 3, 1, 1]

    def test_one_hot_out_of_range(self):
        with pytest.raises(ContractError):
            ds.one_hot([4])

    def test_label_contract(self):
        with pytest.raises(ContractError):
            ds.ImageSample(np.zeros((1, 1)), 4)

    def test_batch_sizes_and_scaling(self):
        src = [ds.ImageSample(np.full((3, 4), 255.0), i % 4) for i in range(10)]
        batches = list(ds.to_batches(src, 4, seed=0))
        assert [len(x) for x, _ in batches] == [4, 4, 2]
        x, y = batches[0]
        assert x.shape == (4, 1, 3, 4) and x.dtype == np.float32 and np.all(x == 1.0)
        assert y.shape == (4, 4)

    def test_batches_reproducible_per_epoch(self):
        src = [ds.ImageSample(np.full((2, 2), float(i)), i % 4) for i in range(12)]
        order = lambda seed, epoch: [x[:, 0, 0, 0].tolist() for x, _ in ds.to_batches(src, 5, seed, epoch)]
        assert order(1, 1) == order(1, 1)
        assert order(1, 1) != order(1, 2)

    def test_full_size_pipeline(self, tmp_path):
        for i, name in enumerate(ds.CLASS_NAMES):
            (tmp_path / name).mkdir()
            write_pgm(tmp_path / name / "a.pgm", np.full((50 + i, 60), 100.0))
        src = ds.resize_samples(ds.load_directory(tmp_path))
        x, y = next(ds.to_batches(src, 4))
        assert x.shape == (4, 1, 176, 208) and y.shape == (4, 4)

    def test_manifest_round_trip(self, tmp_path):
        parts = ds.split(labelled([5] * 4), seed=0)
        named = {k: [ds.ImageSample(s.pixels, s.label, s.provenance, f"p{i}") for i, s in enumerate(v)] for k, v in parts.items()}
        ds.write_manifest(named, tmp_path / "split.csv")
        rows = ds.read_manifest(tmp_path / "split.csv")
        assert (tmp_path / "split.csv").read_text().splitlines()[0] == "path,label,split"
        assert len(rows) == 20 and {r[2] for r in rows} == {"train", "validation", "test"}
