import gzip
import struct

import numpy as np
import pytest

from deepdict.data import (
    DatasetSpec,
    LabeledSet,
    SyntheticSpec,
    balanced_indices,
    gen_synthetic,
    load_dataset,
    load_model,
    read_csv_matrix,
    read_idx,
    save_model,
    write_csv_matrix,
    write_idx,
)
from deepdict.exceptions import DataError, ShapeError
from deepdict.linalg import normalize_columns
from deepdict.model import DdlModel, objective, synthesize
from deepdict.rng import XorShift64Star, splitmix64

from conftest import MNIST_IMAGES, MNIST_LABELS


@pytest.fixture
def idx_pair(tmp_path):
    img, lbl = tmp_path / "img.idx", tmp_path / "lbl.idx"
    write_idx(img, lbl, np.array([np.zeros((2, 2)), np.full((2, 2), 255)]), [3, 7])
    return img, lbl


class TestIdx:
    def test_two_image_fixture(self, idx_pair):
        data = read_idx(*idx_pair)
        np.testing.assert_array_equal(data.features, [[0, 1]] * 4)
        np.testing.assert_array_equal(data.labels, [3, 7])

    def test_row_major_flattening(self, tmp_path):
        img, lbl = tmp_path / "i", tmp_path / "l"
        write_idx(img, lbl, np.arange(6, dtype=np.uint8).reshape(1, 2, 3), [0])
        np.testing.assert_array_equal(read_idx(img, lbl, "none").features[:, 0], [0, 1, 2, 3, 4, 5])

    def test_gzip_and_limit(self, idx_pair, tmp_path):
        gz = tmp_path / "img.gz"
        gz.write_bytes(gzip.compress(idx_pair[0].read_bytes()))
        data = read_idx(gz, idx_pair[1], limit=1)
        assert data.features.shape == (4, 1)

    def test_l2_normalization(self, idx_pair):
        data = read_idx(*idx_pair, normalization="l2")
        np.testing.assert_array_equal(data.features[:, 0], 0)
        np.testing.assert_allclose(np.linalg.norm(data.features[:, 1]), 1.0)

    def test_bad_magic_names_offset(self, idx_pair):
        raw = bytearray(idx_pair[1].read_bytes())
        raw[3] = 0x03
        idx_pair[1].write_bytes(bytes(raw))
        with pytest.raises(DataError, match="bad magic 0x00000803 at offset 0"):
            read_idx(*idx_pair)

    def test_truncated(self, idx_pair):
        idx_pair[0].write_bytes(idx_pair[0].read_bytes()[:-1])
        with pytest.raises(DataError, match="truncated payload"):
            read_idx(*idx_pair)

    def test_count_mismatch(self, idx_pair):
        idx_pair[1].write_bytes(struct.pack(">II", 0x801, 1) + b"\x00")
        with pytest.raises(DataError, match="2 images .* 1 labels"):
            read_idx(*idx_pair)

    def test_bundled_mnist_subset(self):
        data = read_idx(MNIST_IMAGES, MNIST_LABELS)
        assert data.features.shape == (784, 5000)
        assert data.features.min() == 0.0 and data.features.max() == 1.0
        np.testing.assert_array_equal(np.bincount(data.labels), [500] * 10)


class TestCsv:
    def test_shape(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("1,2\n3,4\n5,6\n")
        data = read_csv_matrix(p)
        np.testing.assert_array_equal(data.features, [[1, 3, 5], [2, 4, 6]])
        assert data.labels is None

    def test_label_column(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("a,label,b\n1,0,2\n3,1,4\n")
        data = read_csv_matrix(p, "label")
        np.testing.assert_array_equal(data.labels, [0, 1])
        np.testing.assert_array_equal(data.features, [[1, 3], [2, 4]])
        np.testing.assert_array_equal(read_csv_matrix(p, 1).labels, [0, 1])

    def test_round_trip(self, tmp_path, rng):
        x = rng.standard_normal((5, 9)) * 10.0 ** rng.integers(-8, 8, (5, 9))
        labels = rng.integers(0, 4, 9)
        p = tmp_path / "r.csv"
        write_csv_matrix(p, x, labels)
        back = read_csv_matrix(p, "label")
        np.testing.assert_allclose(back.features, x, rtol=1e-12, atol=0)
        np.testing.assert_array_equal(back.labels, labels)

    def test_ragged(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("1,2\n3\n")
        with pytest.raises(DataError, match="line 2 has 1 cells"):
            read_csv_matrix(p)

    def test_non_numeric_cell_located(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("x,y\n1,2\n3,oops\n")
        with pytest.raises(DataError, match="line 3, column 2"):
            read_csv_matrix(p)

    def test_label_errors(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("a,b\n1,0.5\n")
        with pytest.raises(DataError):
            read_csv_matrix(p, "missing")
        with pytest.raises(DataError):
            read_csv_matrix(p, "b")

    def test_empty(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("")
        with pytest.raises(DataError):
            read_csv_matrix(p)


class TestSynthetic:
    def test_noiseless_objective_is_zero(self):
        x, model, z = gen_synthetic(SyntheticSpec(20, (8, 4), 30, "tanh", 0.5, 0.0, 3))
        assert objective(model, z, x) == 0.0

    def test_same_seed_bit_identical(self):
        spec = SyntheticSpec(10, (5, 3), 20, "sigmoid", 1.0, 0.2, 11)
        a, b = gen_synthetic(spec), gen_synthetic(spec)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[2], b[2])
        assert all(np.array_equal(p, q) for p, q in zip(a[1].dicts, b[1].dicts))
        assert not np.array_equal(a[0], gen_synthetic(SyntheticSpec(10, (5, 3), 20, "sigmoid", 1.0, 0.2, 12))[0])

    def test_noise_energy(self):
        x, model, z = gen_synthetic(SyntheticSpec(50, (25, 12), 500, "tanh", 0.6, 0.1, 0))
        energy = np.sum((x - synthesize(model, z)) ** 2)
        assert energy == pytest.approx(0.01 * 50 * 500, rel=0.10)

    def test_ground_truth_structure(self):
        x, model, z = gen_synthetic(SyntheticSpec(12, (6, 3), 40, coef_scale=2.0))
        assert x.shape == (12, 40) and z.shape == (3, 40)
        for d in model.dicts:
            np.testing.assert_allclose(np.linalg.norm(d, axis=0), 1.0)
        assert np.std(z) == pytest.approx(2.0, rel=0.3)

    @pytest.mark.parametrize("kwargs", [{"coef_scale": 0.0}, {"noise_sigma": -1.0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SyntheticSpec(5, (3,), 10, **kwargs)
        with pytest.raises(ShapeError):
            SyntheticSpec(5, (0,), 10)

    def test_from_text(self):
        a = SyntheticSpec.from_text("input_dim=50 layer_atoms=25,12 n_samples=500 coef_scale=0.6 seed=4")
        b = SyntheticSpec.from_text('{"input_dim": 50, "layer_atoms": [25, 12], "n_samples": 500, '
                                    '"coef_scale": 0.6, "seed": 4}')
        assert a == b
        assert a.layer_atoms == (25, 12)
        with pytest.raises(DataError):
            SyntheticSpec.from_text("input_dim")
        with pytest.raises(DataError):
            SyntheticSpec.from_text("bogus=1")


class TestModelFile:
    def _model(self, rng):
        dims = (9, 6, 4, 2)
        return DdlModel(tuple(normalize_columns(rng.standard_normal((dims[i], dims[i + 1]))) for i in range(3)),
                        "sigmoid")

    def test_round_trip_bit_exact(self, tmp_path, rng):
        model = self._model(rng)
        save_model(model, tmp_path / "m.ddlm")
        back = load_model(tmp_path / "m.ddlm")
        assert back.activation == model.activation
        assert all(np.array_equal(a, b) for a, b in zip(model.dicts, back.dicts))
        assert all(a.tobytes() == b.tobytes() for a, b in zip(model.dicts, back.dicts))

    def test_header_layout(self, tmp_path, rng):
        save_model(self._model(rng), tmp_path / "m.ddlm")
        head = (tmp_path / "m.ddlm").read_bytes().split(b"data\n")[0].decode()
        assert head.splitlines() == ["DDLM", "version 1", "activation sigmoid", "levels 3",
                                     "shape 1 9 6", "shape 2 6 4", "shape 3 4 2"]

    def test_truncated(self, tmp_path, rng):
        p = tmp_path / "m.ddlm"
        save_model(self._model(rng), p)
        p.write_bytes(p.read_bytes()[:-8])
        expected = 8 * (54 + 24 + 8)
        with pytest.raises(DataError, match=f"payload is {expected - 8} bytes, expected {expected}"):
            load_model(p)

    def test_unsupported_version(self, tmp_path, rng):
        p = tmp_path / "m.ddlm"
        save_model(self._model(rng), p)
        p.write_bytes(p.read_bytes().replace(b"version 1", b"version 2", 1))
        with pytest.raises(DataError, match="unsupported model format version 2"):
            load_model(p)

    def test_corrupt_header(self, tmp_path):
        p = tmp_path / "m.ddlm"
        p.write_bytes(b"NOPE\n")
        with pytest.raises(DataError, match="corrupt header"):
            load_model(p)
        p.write_bytes(b"DDLM\nversion x\n")
        with pytest.raises(DataError, match="corrupt header"):
            load_model(p)


class TestDatasetSpec:
    def test_idx_with_options(self):
        spec = DatasetSpec.parse("idx:a.gz,b.gz?norm=l2&per_class=10&block=1&seed=3")
        assert (spec.source, spec.paths, spec.normalization) == ("idx", ["a.gz", "b.gz"], "l2")
        assert (spec.per_class, spec.block, spec.seed) == (10, 1, 3)

    def test_csv_forms(self):
        assert DatasetSpec.parse("csv:x.csv?label=y").label_column == "y"
        assert DatasetSpec.parse("data/x.csv").source == "csv"
        assert DatasetSpec.parse("x.csv?limit=5").limit == 5

    def test_synth(self):
        spec = DatasetSpec.parse("synth:input_dim=6 layer_atoms=3 n_samples=7")
        assert load_dataset("synth:input_dim=6 layer_atoms=3 n_samples=7").features.shape == (6, 7)
        assert spec.synthetic.layer_atoms == (3,)

    @pytest.mark.parametrize("text", ["nope", "idx:only_one", "csv:x.csv?bogus=1", "csv:x.csv?norm=zscore",
                                      "csv:x.csv?limit=abc"])
    def test_rejects(self, text):
        with pytest.raises(DataError):
            DatasetSpec.parse(text)

    def test_missing_file_is_data_error(self, tmp_path):
        with pytest.raises(DataError):
            load_dataset(f"csv:{tmp_path / 'absent.csv'}")

    def test_balanced_disjoint_split(self):
        base = f"idx:{MNIST_IMAGES},{MNIST_LABELS}?per_class=20&seed=5"
        train, test = load_dataset(base + "&block=0"), load_dataset(base + "&block=1")
        np.testing.assert_array_equal(np.bincount(train.labels), [20] * 10)
        np.testing.assert_array_equal(np.bincount(test.labels), [20] * 10)
        train_cols = {c.tobytes() for c in train.features.T}
        assert not any(c.tobytes() in train_cols for c in test.features.T)


def test_balanced_indices_properties():
    labels = np.repeat([0, 1, 2], 10)
    a = balanced_indices(labels, 4, 0, 9)
    b = balanced_indices(labels, 4, 1, 9)
    assert not set(a) & set(b)
    np.testing.assert_array_equal(np.bincount(labels[a]), [4, 4, 4])
    np.testing.assert_array_equal(a, balanced_indices(labels, 4, 0, 9))
    with pytest.raises(DataError):
        balanced_indices(labels, 4, 2, 9)


def test_labeled_set_invariants():
    with pytest.raises(ShapeError):
        LabeledSet(np.ones((2, 3)), [0, 1])
    with pytest.raises(DataError):
        LabeledSet(np.ones((2, 2)), [0, -1])


class TestRng:
    def test_splitmix_reference_vectors(self):
        assert splitmix64(0) == 0xE220A8397B1DCDAF
        assert splitmix64(1234567) == 6457827717110365317

    def test_frozen_stream(self):
        r = XorShift64Star(0)
        assert [r.next_u64() for _ in range(3)] == [8916199331640804048, 16032783972208265725, 12954103179475586193]

    def test_uniform_and_normal_moments(self):
        r = XorShift64Star(7)
        u = r.uniform(-1.0, 1.0, (20000,))
        assert u.min() >= -1.0 and u.max() < 1.0
        assert abs(u.mean()) < 0.02
        n = r.normal((20000,))
        assert abs(n.mean()) < 0.03 and abs(n.std() - 1) < 0.03

    def test_seeds_differ(self):
        assert XorShift64Star(1).next_u64() != XorShift64Star(2).next_u64()
