import numpy as np
import pytest

from zsar.data import (ConfigError, Dataset, LoadError, Split, SyntheticWorldSpec,
                       generate_splits, generate_synthetic, load_attributes, load_dataset,
                       load_labels, load_matrix, load_param_map, load_splits,
                       save_attributes_csv, save_dataset, save_labels, save_matrix,
                       save_param_map, save_splits)
from zsar.gaussians import fit_mle
from zsar.linalg import KernelSpec
from zsar.regression import HyperParams, ParamMap, predict_unseen


class TestMatrixFormat:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        arr = rng.normal(size=(7, 5)) * np.array([1e-8, 1.0, 1e8, -3.7, 0.0])
        path = tmp_path / "m.zsm"
        save_matrix(path, arr)
        loaded = load_matrix(path)
        assert loaded.tobytes() == arr.tobytes()
        save_matrix(tmp_path / "m2.zsm", loaded)
        assert (tmp_path / "m2.zsm").read_bytes() == path.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.zsm"
        path.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(LoadError) as err:
            load_matrix(path)
        assert err.value.offset == 0
        assert str(path) in str(err.value)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "bad.zsm"
        good = tmp_path / "good.zsm"
        save_matrix(good, np.ones((1, 1)))
        blob = bytearray(good.read_bytes())
        blob[4] = 9
        path.write_bytes(bytes(blob))
        with pytest.raises(LoadError) as err:
            load_matrix(path)
        assert err.value.offset == 4

    def test_truncated_payload(self, tmp_path):
        good = tmp_path / "good.zsm"
        save_matrix(good, np.ones((2, 3)))
        bad = tmp_path / "bad.zsm"
        bad.write_bytes(good.read_bytes()[:-8])
        with pytest.raises(LoadError):
            load_matrix(bad)

    def test_trailing_bytes(self, tmp_path):
        good = tmp_path / "good.zsm"
        save_matrix(good, np.ones((2, 3)))
        bad = tmp_path / "bad.zsm"
        bad.write_bytes(good.read_bytes() + b"x")
        with pytest.raises(LoadError):
            load_matrix(bad)

    def test_non_finite_payload(self, tmp_path):
        good = tmp_path / "good.zsm"
        save_matrix(good, np.ones((2, 2)))
        blob = bytearray(good.read_bytes())
        blob[14:22] = np.array([np.inf]).tobytes()
        bad = tmp_path / "bad.zsm"
        bad.write_bytes(bytes(blob))
        with pytest.raises(LoadError) as err:
            load_matrix(bad)
        assert err.value.offset == 14

    def test_save_rejects_non_finite(self, tmp_path):
        with pytest.raises(ValueError):
            save_matrix(tmp_path / "x.zsm", np.array([[np.nan]]))


class TestLabelsAndAttributes:
    def test_labels_round_trip(self, tmp_path):
        path = tmp_path / "labels.csv"
        save_labels(path, [3, 0, 2, 2, 1])
        assert np.array_equal(load_labels(path), [3, 0, 2, 2, 1])

    def test_labels_parse_error_names_line(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text("0\n1\nxyz\n")
        with pytest.raises(LoadError) as err:
            load_labels(path)
        assert err.value.offset == 3

    def test_attributes_csv_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        attrs = rng.normal(size=(4, 6))
        path = tmp_path / "attrs.csv"
        save_attributes_csv(path, attrs)
        assert load_attributes(path).tobytes() == attrs.tobytes()

    def test_attributes_binary_sniffing(self, tmp_path):
        attrs = np.arange(12.0).reshape(3, 4)
        path = tmp_path / "attrs.zsm"
        save_matrix(path, attrs)
        assert np.array_equal(load_attributes(path), attrs)

    def test_ragged_attributes_rejected(self, tmp_path):
        path = tmp_path / "attrs.csv"
        path.write_text("1.0,2.0\n3.0\n")
        with pytest.raises(LoadError) as err:
            load_attributes(path)
        assert err.value.offset == 2


class TestLoadDataset:
    def write_dataset(self, tmp_path, features, labels, attrs):
        save_matrix(tmp_path / "f.zsm", features)
        save_labels(tmp_path / "l.csv", labels)
        save_attributes_csv(tmp_path / "a.csv", attrs)
        return tmp_path / "f.zsm", tmp_path / "l.csv", tmp_path / "a.csv"

    def test_ucf101_shaped_load(self, tmp_path):
        # 13320 videos, 101 classes, 115-dim attributes
        rng = np.random.default_rng(2)
        n, c, k = 13320, 101, 115
        paths = self.write_dataset(tmp_path, rng.normal(size=(n, 8)),
                                   rng.integers(0, c, size=n), rng.normal(size=(c, k)))
        ds = load_dataset(*paths)
        assert ds.n_examples == n
        assert ds.n_classes == c
        assert ds.attr_dim == k

    def test_out_of_range_label(self, tmp_path):
        paths = self.write_dataset(tmp_path, np.ones((3, 2)), [0, 2, 1], np.eye(2))
        with pytest.raises(LoadError) as err:
            load_dataset(*paths)
        assert err.value.offset == 2
        assert "l.csv" in err.value.path

    def test_label_count_mismatch(self, tmp_path):
        paths = self.write_dataset(tmp_path, np.ones((3, 2)), [0, 1], np.eye(2))
        with pytest.raises(LoadError):
            load_dataset(*paths)

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        ds = Dataset(rng.normal(size=(10, 4)), rng.integers(0, 3, size=10),
                     rng.normal(size=(3, 5)))
        save_dataset(ds, tmp_path / "f.zsm", tmp_path / "l.csv", tmp_path / "a.csv")
        loaded = load_dataset(tmp_path / "f.zsm", tmp_path / "l.csv", tmp_path / "a.csv")
        assert loaded.features.tobytes() == ds.features.tobytes()
        assert np.array_equal(loaded.labels, ds.labels)
        assert loaded.attributes.tobytes() == ds.attributes.tobytes()

    def test_standardize_flag(self, tmp_path):
        rng = np.random.default_rng(4)
        features = rng.normal(size=(50, 3)) * 7.0 + 4.0
        paths = self.write_dataset(tmp_path, features, rng.integers(0, 2, size=50),
                                   np.eye(2))
        ds = load_dataset(*paths, standardize=True)
        assert ds.metadata["standardized"] == "true"
        assert np.abs(ds.features.mean(axis=0)).max() <= 1e-12
        assert np.abs(ds.features.std(axis=0) - 1.0).max() <= 1e-12

    def test_dataset_invariants(self):
        with pytest.raises(ValueError):
            Dataset(np.ones((2, 2)), [0, 5], np.eye(3))
        with pytest.raises(ValueError):
            Dataset(np.array([[np.inf, 0.0]]), [0], np.eye(1))


class TestSplits:
    def test_ucf101_regime(self):
        splits = generate_splits(101, 51, 30, seed=0)
        assert len(splits) == 30
        for s in splits:
            assert len(s.seen_classes) == 51
            assert len(s.unseen_classes) == 50
            assert set(s.seen_classes + s.unseen_classes) == set(range(101))

    def test_olympic_regime(self):
        splits = generate_splits(16, 8, 30, seed=1)
        assert all(len(s.seen_classes) == 8 and len(s.unseen_classes) == 8
                   for s in splits)

    def test_deterministic(self):
        a = generate_splits(20, 12, 5, seed=42)
        b = generate_splits(20, 12, 5, seed=42)
        assert a == b

    def test_sorted_and_seeded(self):
        splits = generate_splits(10, 4, 3, seed=9)
        for i, s in enumerate(splits):
            assert list(s.seen_classes) == sorted(s.seen_classes)
            assert list(s.unseen_classes) == sorted(s.unseen_classes)
            assert s.seed == 9 + i

    def test_range_validation(self):
        with pytest.raises(ConfigError):
            generate_splits(10, 0, 1, seed=0)
        with pytest.raises(ConfigError):
            generate_splits(10, 10, 1, seed=0)

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            Split((0, 1, 2), (2, 3), seed=0)

    def test_csv_round_trip(self, tmp_path):
        splits = generate_splits(12, 7, 4, seed=3)
        path = tmp_path / "splits.csv"
        save_splits(path, splits)
        loaded = load_splits(path)
        assert len(loaded) == 4
        for orig, back in zip(splits, loaded):
            assert back.seen_classes == orig.seen_classes
            assert back.unseen_classes == orig.unseen_classes

    def test_bad_role_rejected(self, tmp_path):
        path = tmp_path / "splits.csv"
        path.write_text("split_id,class_id,role\n0,1,seen\n0,2,mystery\n")
        with pytest.raises(LoadError) as err:
            load_splits(path)
        assert err.value.offset == 3


class TestSynthetic:
    def spec(self, **kwargs):
        base = dict(n_classes=4, dim_d=3, dim_k=4, w_true=np.arange(12.0).reshape(3, 4),
                    noise_scale=1.0, examples_per_class=50, attribute_scheme="one_hot",
                    seed=0)
        base.update(kwargs)
        return SyntheticWorldSpec(**base)

    def test_vanishing_noise(self):
        dataset, truths = generate_synthetic(self.spec(noise_scale=1e-6))
        means = np.stack([truths[c].mean for c in dataset.labels])
        assert np.abs(dataset.features - means).max() <= 1e-4

    def test_one_hot_means_are_map_columns(self):
        spec = self.spec()
        dataset, truths = generate_synthetic(spec)
        for c in range(4):
            assert np.allclose(truths[c].mean, spec.w_true[:, c])

    def test_one_hot_cycles_when_fewer_attribute_dims(self):
        spec = self.spec(n_classes=4, dim_k=2, w_true=np.arange(6.0).reshape(3, 2))
        dataset, truths = generate_synthetic(spec)
        assert np.allclose(dataset.attributes[0], dataset.attributes[2])
        assert np.allclose(truths[0].mean, truths[2].mean)

    def test_reproducible(self):
        spec = self.spec(attribute_scheme="random_unit")
        a, _ = generate_synthetic(spec)
        b, _ = generate_synthetic(spec)
        assert a.features.tobytes() == b.features.tobytes()
        assert a.attributes.tobytes() == b.attributes.tobytes()
        assert np.array_equal(a.labels, b.labels)

    def test_unit_norm_attributes(self):
        dataset, _ = generate_synthetic(self.spec(attribute_scheme="random_unit"))
        norms = np.linalg.norm(dataset.attributes, axis=1)
        assert np.abs(norms - 1.0).max() <= 1e-12

    def test_mle_recovers_ground_truth(self):
        dataset, truths = generate_synthetic(
            self.spec(attribute_scheme="random_unit", examples_per_class=10000,
                      noise_scale=0.8))
        for c in range(4):
            fitted = fit_mle(dataset.features[dataset.labels == c])
            assert np.abs(fitted.mean - truths[c].mean).max() <= 0.05

    def test_per_class_counts(self):
        dataset, _ = generate_synthetic(self.spec(examples_per_class=[5, 6, 7, 8]))
        assert dataset.class_counts().tolist() == [5, 6, 7, 8]

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            self.spec(noise_scale=0.0)
        with pytest.raises(ValueError):
            self.spec(examples_per_class=[1, 2])
        with pytest.raises(ValueError):
            self.spec(w_true=np.ones((2, 2)))


class TestParamMapFormat:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        pm = ParamMap(rng.normal(size=(3, 5)), rng.normal(size=(3, 5)),
                      rng.normal(size=(5, 2)), KernelSpec("rbf", 1.25),
                      HyperParams(0.3, 0.1, 0.2, 0.05))
        path = tmp_path / "map.zsm"
        save_param_map(path, pm)
        loaded = load_param_map(path)
        assert loaded.w_mu.tobytes() == pm.w_mu.tobytes()
        assert loaded.w_sigma.tobytes() == pm.w_sigma.tobytes()
        assert loaded.seen_attrs.tobytes() == pm.seen_attrs.tobytes()
        assert loaded.kernel == pm.kernel
        assert loaded.hyper == pm.hyper
        queries = rng.normal(size=(2, 2))
        for g1, g2 in zip(predict_unseen(pm, queries), predict_unseen(loaded, queries)):
            assert g1.mean.tobytes() == g2.mean.tobytes()

    def test_raw_linear_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        pm = ParamMap(rng.normal(size=(3, 2)), rng.normal(size=(3, 2)),
                      rng.normal(size=(5, 2)), None, HyperParams())
        path = tmp_path / "map.zsm"
        save_param_map(path, pm)
        assert load_param_map(path).kernel is None

    def test_header_validation(self, tmp_path):
        path = tmp_path / "map.zsm"
        path.write_bytes(b'{"format": "other"}\n')
        with pytest.raises(LoadError):
            load_param_map(path)
