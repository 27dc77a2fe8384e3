import json
import struct

import numpy as np
import pytest

from czsl import data


def small_spec(**kw):
    base = dict(num_classes=8, attr_dim=4, feature_dim=16,
                samples_per_class=40, cluster_noise=0.3, seed=7)
    base.update(kw)
    return data.SyntheticSpec(**base)


def fake_dataset(num_classes, attr_dim=3, feature_dim=4, name="fake"):
    """Minimal in-memory dataset: one train and one test row per class."""
    rng = np.random.default_rng(0)
    labels = np.arange(num_classes, dtype=np.int64)
    return data.FeatureDataset(
        name=name,
        features_train=rng.normal(size=(num_classes, feature_dim)).astype(np.float32),
        labels_train=labels.copy(),
        features_test=rng.normal(size=(num_classes, feature_dim)).astype(np.float32),
        labels_test=labels.copy(),
        attributes=rng.normal(size=(num_classes, attr_dim)).astype(np.float32),
    )


class TestContainerIO:
    def test_roundtrip_bit_exact(self, tmp_path):
        ds = data.make_synthetic_dataset(small_spec())
        data.write_dataset(tmp_path / "ds", ds)
        back = data.load_dataset(str(tmp_path / "ds"))
        assert back.name == ds.name
        for f in ("features_train", "labels_train", "features_test",
                  "labels_test", "attributes"):
            assert np.array_equal(getattr(back, f), getattr(ds, f))

    def test_write_is_reproducible(self, tmp_path):
        ds = data.make_synthetic_dataset(small_spec())
        data.write_dataset(tmp_path / "a", ds)
        data.write_dataset(tmp_path / "b", ds)
        for fname in ("meta.json", "features_train.f32", "labels_train.u32"):
            assert (tmp_path / "a" / fname).read_bytes() == (tmp_path / "b" / fname).read_bytes()

    def test_table_shaped_containers(self, tmp_path):
        # aPY-shaped: 32 classes, 64 attributes
        ds = data.make_synthetic_dataset(small_spec(num_classes=32, attr_dim=64,
                                                    samples_per_class=5))
        data.write_dataset(tmp_path / "apy", ds)
        back = data.load_dataset(str(tmp_path / "apy"))
        assert back.num_classes == 32 and back.attr_dim == 64

    def test_cub_shaped_counts(self, tmp_path):
        # CUB-shaped counts: 200 classes, 312 attributes, 9440 + 2348 rows
        rng = np.random.default_rng(1)
        n_tr, n_te, c, a, d = 9440, 2348, 200, 312, 8
        ds = data.FeatureDataset(
            name="cub-shaped",
            features_train=rng.normal(size=(n_tr, d)).astype(np.float32),
            labels_train=rng.integers(0, c, size=n_tr).astype(np.int64),
            features_test=rng.normal(size=(n_te, d)).astype(np.float32),
            labels_test=rng.integers(0, c, size=n_te).astype(np.int64),
            attributes=rng.normal(size=(c, a)).astype(np.float32),
        )
        data.write_dataset(tmp_path / "cub", ds)
        back = data.load_dataset(str(tmp_path / "cub"))
        assert back.num_classes == 200 and back.attr_dim == 312
        assert back.features_train.shape[0] == 9440
        assert back.features_test.shape[0] == 2348

    def test_missing_payload(self, tmp_path):
        ds = data.make_synthetic_dataset(small_spec(samples_per_class=4))
        data.write_dataset(tmp_path / "ds", ds)
        (tmp_path / "ds" / "attributes.f32").unlink()
        with pytest.raises(FileNotFoundError, match="attributes.f32"):
            data.load_dataset(str(tmp_path / "ds"))

    def test_missing_meta(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="meta.json"):
            data.load_dataset(str(tmp_path))

    def test_byte_count_mismatch(self, tmp_path):
        ds = data.make_synthetic_dataset(small_spec(samples_per_class=4))
        data.write_dataset(tmp_path / "ds", ds)
        p = tmp_path / "ds" / "features_test.f32"
        p.write_bytes(p.read_bytes()[:-4])
        with pytest.raises(ValueError, match=r"features_test\.f32.*bytes"):
            data.load_dataset(str(tmp_path / "ds"))

    def test_nan_payload_reports_offset(self, tmp_path):
        ds = data.make_synthetic_dataset(small_spec(samples_per_class=4))
        data.write_dataset(tmp_path / "ds", ds)
        p = tmp_path / "ds" / "features_train.f32"
        buf = bytearray(p.read_bytes())
        flat = 3 * ds.feature_dim + 2    # row 3, col 2
        buf[4 * flat: 4 * flat + 4] = struct.pack("<f", float("nan"))
        p.write_bytes(bytes(buf))
        with pytest.raises(ValueError, match="byte offset %d" % (4 * flat)):
            data.load_dataset(str(tmp_path / "ds"))

    def test_label_out_of_range_reports_offset(self, tmp_path):
        ds = data.make_synthetic_dataset(small_spec(samples_per_class=4))
        data.write_dataset(tmp_path / "ds", ds)
        p = tmp_path / "ds" / "labels_train.u32"
        buf = bytearray(p.read_bytes())
        buf[12:16] = struct.pack("<I", ds.num_classes)
        p.write_bytes(bytes(buf))
        with pytest.raises(ValueError, match="label %d out of range.*byte offset 12"
                           % ds.num_classes):
            data.load_dataset(str(tmp_path / "ds"))

    def test_meta_missing_field(self, tmp_path):
        ds = data.make_synthetic_dataset(small_spec(samples_per_class=4))
        data.write_dataset(tmp_path / "ds", ds)
        meta = json.loads((tmp_path / "ds" / "meta.json").read_text())
        del meta["attr_dim"]
        (tmp_path / "ds" / "meta.json").write_text(json.dumps(meta))
        with pytest.raises(ValueError, match="attr_dim"):
            data.load_dataset(str(tmp_path / "ds"))

    def test_sun_class_count_warns_not_errors(self, tmp_path):
        ds = fake_dataset(717, name="SUN")
        data.write_dataset(tmp_path / "sun", ds)
        with pytest.warns(UserWarning, match="717"):
            back = data.load_dataset(str(tmp_path / "sun"))
        assert back.num_classes == 717

    def test_sun_contract_count_is_silent(self, tmp_path):
        import warnings
        ds = fake_dataset(708, name="SUN")
        data.write_dataset(tmp_path / "sun", ds)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            back = data.load_dataset(str(tmp_path / "sun"))
        assert back.num_classes == 708

    def test_tasks_override_roundtrip(self, tmp_path):
        ds = fake_dataset(6)
        ds.task_override = data.TaskSpec(tasks=[[5, 0], [1, 2], [3, 4]])
        data.write_dataset(tmp_path / "ds", ds)
        back = data.load_dataset(str(tmp_path / "ds"))
        assert back.task_override.tasks == [[5, 0], [1, 2], [3, 4]]
        spec, _ = data.split_tasks(back, 3)
        assert spec.tasks == [[5, 0], [1, 2], [3, 4]]
        with pytest.raises(ValueError, match="pins 3 tasks"):
            data.split_tasks(back, 2)

    def test_tasks_override_must_partition(self, tmp_path):
        ds = fake_dataset(4)
        data.write_dataset(tmp_path / "ds", ds)
        (tmp_path / "ds" / "tasks.json").write_text('{"tasks": [[0, 1], [1, 2, 3]]}')
        with pytest.raises(ValueError, match="assigned twice"):
            data.load_dataset(str(tmp_path / "ds"))
        (tmp_path / "ds" / "tasks.json").write_text('{"tasks": [[0, 1], [2]]}')
        with pytest.raises(ValueError, match="cover"):
            data.load_dataset(str(tmp_path / "ds"))


class TestSplitTasks:
    def test_even_split_200_by_20(self):
        spec, _ = data.split_tasks(fake_dataset(200), 20)
        assert all(len(t) == 10 for t in spec.tasks)

    def test_even_split_32_by_4(self):
        spec, _ = data.split_tasks(fake_dataset(32), 4)
        assert all(len(t) == 8 for t in spec.tasks)

    def test_remainder_708_by_15(self):
        spec, _ = data.split_tasks(fake_dataset(708), 15)
        assert [len(t) for t in spec.tasks] == [48, 48, 48] + [47] * 12

    def test_partition_property(self):
        for c, t in [(7, 3), (10, 10), (13, 1), (100, 7)]:
            spec, _ = data.split_tasks(fake_dataset(c), t)
            assert spec.all_classes() == list(range(c))

    def test_contiguous_ascending(self):
        spec, _ = data.split_tasks(fake_dataset(10), 3)
        assert spec.tasks == [[0, 1, 2, 3], [4, 5, 6], [7, 8, 9]]

    def test_views_reference_own_classes(self):
        rng = np.random.default_rng(2)
        c = 9
        ds = fake_dataset(c)
        ds.labels_train = rng.integers(0, c, size=c).astype(np.int64)
        spec, views = data.split_tasks(ds, 3)
        covered = []
        for view, classes in zip(views, spec.tasks):
            assert view.classes == classes
            for i in view.train_indices:
                assert int(ds.labels_train[i]) in classes
            covered.extend(view.train_indices.tolist())
        assert sorted(covered) == list(range(c))

    def test_range_errors(self):
        ds = fake_dataset(5)
        with pytest.raises(ValueError):
            data.split_tasks(ds, 0)
        with pytest.raises(ValueError):
            data.split_tasks(ds, 6)


class TestSeenUnseen:
    def test_halfway(self):
        spec, _ = data.split_tasks(fake_dataset(32), 4)
        seen, unseen = data.seen_unseen_partition(spec, 2)
        assert len(seen) == 16 and len(unseen) == 16

    def test_extremes(self):
        spec, _ = data.split_tasks(fake_dataset(12), 4)
        seen, unseen = data.seen_unseen_partition(spec, 0)
        assert seen == [] and unseen == list(range(12))
        seen, unseen = data.seen_unseen_partition(spec, 4)
        assert seen == list(range(12)) and unseen == []

    def test_disjoint_union_every_t(self):
        spec, _ = data.split_tasks(fake_dataset(11), 3)
        for t in range(4):
            seen, unseen = data.seen_unseen_partition(spec, t)
            assert not set(seen) & set(unseen)
            assert sorted(seen + unseen) == list(range(11))

    def test_out_of_range(self):
        spec, _ = data.split_tasks(fake_dataset(6), 2)
        with pytest.raises(ValueError):
            data.seen_unseen_partition(spec, 3)
        with pytest.raises(ValueError):
            data.seen_unseen_partition(spec, -1)


class TestSynthetic:
    def test_deterministic(self):
        a = data.make_synthetic_dataset(small_spec())
        b = data.make_synthetic_dataset(small_spec())
        for f in ("features_train", "labels_train", "features_test",
                  "labels_test", "attributes"):
            assert np.array_equal(getattr(a, f), getattr(b, f))

    def test_counts(self):
        ds = data.make_synthetic_dataset(small_spec())
        assert ds.features_train.shape[0] + ds.features_test.shape[0] == 8 * 40
        assert ds.features_test.shape[0] == 8 * 8    # max(1, 40 // 5) per class

    def test_zero_noise_collapses_clusters(self):
        ds = data.make_synthetic_dataset(small_spec(cluster_noise=0.0,
                                                    samples_per_class=5))
        for cls in range(8):
            rows = ds.features_train[ds.labels_train == cls]
            assert np.array_equal(rows, np.tile(rows[0], (len(rows), 1)))

    def test_clusters_follow_linear_map(self):
        spec = small_spec(cluster_noise=0.0, samples_per_class=5)
        ds = data.make_synthetic_dataset(spec)
        amap = np.random.default_rng((spec.seed, 2)).normal(
            size=(spec.attr_dim, spec.feature_dim)) / np.sqrt(spec.attr_dim)
        means = (ds.attributes.astype(np.float64) @ amap).astype(np.float32)
        # attributes were drawn in float64 then stored as float32, so the
        # reconstructed means agree only to float32 precision
        for cls in range(8):
            row = ds.features_train[ds.labels_train == cls][0]
            assert np.allclose(row, means[cls], rtol=1e-4, atol=1e-4)

    def test_low_noise_samples_nearest_own_mean(self):
        ds = data.make_synthetic_dataset(small_spec(cluster_noise=0.05))
        means = np.stack([ds.features_train[ds.labels_train == c].mean(axis=0)
                          for c in range(8)])
        d2 = ((ds.features_test[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
        assert np.array_equal(np.argmin(d2, axis=1), ds.labels_test)

    def test_split_rule_small(self):
        ds = data.make_synthetic_dataset(small_spec(samples_per_class=2))
        assert ds.features_test.shape[0] == 8    # one test row per class

    def test_validation(self):
        with pytest.raises(ValueError):
            data.make_synthetic_dataset(small_spec(samples_per_class=1))
        with pytest.raises(ValueError):
            data.make_synthetic_dataset(small_spec(cluster_noise=-0.1))
        with pytest.raises(ValueError):
            data.make_synthetic_dataset(
                small_spec(attribute_to_mean_map=np.zeros((3, 3))))
