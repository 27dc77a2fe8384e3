"""Dataset containers, task splits, and synthetic data generation.

A dataset lives in a directory:

    meta.json           {name, num_train, num_test, feature_dim,
                         num_classes, attr_dim}
    features_train.f32  row-major little-endian binary32, num_train x feature_dim
    features_test.f32   row-major little-endian binary32, num_test x feature_dim
    attributes.f32      row-major little-endian binary32, num_classes x attr_dim
    labels_train.u32    little-endian uint32, num_train entries
    labels_test.u32     little-endian uint32, num_test entries
    tasks.json          optional {"tasks": [[class indices], ...]}; when present
                        it overrides the computed class-to-task assignment

Features and attributes stay float32 in memory so write/load round-trips
are bit-exact; training code widens to float64 at the point of use.
Upstream ZSL feature archives (.mat files and friends) must be converted
to this layout externally; this package does not read them.
"""

import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from czsl.seeding import rng_for


@dataclass
class FeatureDataset:
    name: str
    features_train: np.ndarray
    labels_train: np.ndarray
    features_test: np.ndarray
    labels_test: np.ndarray
    attributes: np.ndarray
    task_override: "TaskSpec | None" = None

    @property
    def num_classes(self) -> int:
        return self.attributes.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features_train.shape[1]

    @property
    def attr_dim(self) -> int:
        return self.attributes.shape[1]


@dataclass
class TaskSpec:
    tasks: list

    @property
    def num_tasks(self) -> int:
        return len(self.tasks)

    def all_classes(self):
        return sorted(c for task in self.tasks for c in task)


@dataclass
class TaskView:
    task_index: int
    classes: list
    train_indices: np.ndarray
    test_indices: np.ndarray


@dataclass
class SyntheticSpec:
    num_classes: int
    attr_dim: int
    feature_dim: int
    samples_per_class: int
    cluster_noise: float
    seed: int
    attribute_to_mean_map: np.ndarray | None = None


_META_FIELDS = ("name", "num_train", "num_test", "feature_dim", "num_classes", "attr_dim")


def _read_f32(path, rows, cols):
    want = rows * cols * 4
    try:
        with open(path, "rb") as f:
            buf = f.read()
    except FileNotFoundError:
        raise FileNotFoundError("missing payload file: %s" % path) from None
    if len(buf) != want:
        raise ValueError("%s: expected %d bytes (%d x %d binary32), found %d"
                         % (path, want, rows, cols, len(buf)))
    arr = np.frombuffer(buf, dtype="<f4").reshape(rows, cols)
    bad = ~np.isfinite(arr)
    if bad.any():
        flat = int(np.argmax(bad.ravel()))
        raise ValueError("%s: non-finite value at byte offset %d (row %d, col %d)"
                         % (path, flat * 4, flat // cols, flat % cols))
    return arr


def _read_u32(path, count, num_classes):
    want = count * 4
    try:
        with open(path, "rb") as f:
            buf = f.read()
    except FileNotFoundError:
        raise FileNotFoundError("missing payload file: %s" % path) from None
    if len(buf) != want:
        raise ValueError("%s: expected %d bytes (%d uint32), found %d"
                         % (path, want, count, len(buf)))
    raw = np.frombuffer(buf, dtype="<u4")
    bad = raw >= num_classes
    if bad.any():
        idx = int(np.argmax(bad))
        raise ValueError("%s: label %d out of range [0, %d) at byte offset %d"
                         % (path, int(raw[idx]), num_classes, idx * 4))
    return raw.astype(np.int64)


def _validate_taskspec(spec: TaskSpec, num_classes: int, origin: str) -> None:
    seen = set()
    for i, task in enumerate(spec.tasks):
        if not task:
            raise ValueError("%s: task %d is empty" % (origin, i + 1))
        for c in task:
            if not (0 <= int(c) < num_classes):
                raise ValueError("%s: class %d out of range [0, %d)"
                                 % (origin, int(c), num_classes))
            if int(c) in seen:
                raise ValueError("%s: class %d assigned twice" % (origin, int(c)))
            seen.add(int(c))
    if len(seen) != num_classes:
        raise ValueError("%s: tasks cover %d of %d classes"
                         % (origin, len(seen), num_classes))


def load_dataset(path: str) -> FeatureDataset:
    """Read and validate one container directory."""
    meta_path = os.path.join(path, "meta.json")
    try:
        with open(meta_path) as f:
            meta = json.load(f)
    except FileNotFoundError:
        raise FileNotFoundError("missing descriptor: %s" % meta_path) from None
    except json.JSONDecodeError as e:
        raise ValueError("%s: unreadable JSON: %s" % (meta_path, e)) from None
    for key in _META_FIELDS:
        if key not in meta:
            raise ValueError("%s: missing field %r" % (meta_path, key))
    c = int(meta["num_classes"])
    d = int(meta["feature_dim"])
    a = int(meta["attr_dim"])
    if c < 2 or d <= 0 or a <= 0:
        raise ValueError("%s: need num_classes >= 2 and positive dims, got C=%d d=%d a=%d"
                         % (meta_path, c, d, a))
    name = str(meta["name"])
    if name.upper() == "SUN" and c == 717:
        warnings.warn("SUN container has 717 classes; the documented contract value is 708")
    ds = FeatureDataset(
        name=name,
        features_train=_read_f32(os.path.join(path, "features_train.f32"),
                                 int(meta["num_train"]), d),
        labels_train=_read_u32(os.path.join(path, "labels_train.u32"),
                               int(meta["num_train"]), c),
        features_test=_read_f32(os.path.join(path, "features_test.f32"),
                                int(meta["num_test"]), d),
        labels_test=_read_u32(os.path.join(path, "labels_test.u32"),
                              int(meta["num_test"]), c),
        attributes=_read_f32(os.path.join(path, "attributes.f32"), c, a),
    )
    tasks_path = os.path.join(path, "tasks.json")
    if os.path.exists(tasks_path):
        with open(tasks_path) as f:
            try:
                spec = TaskSpec(tasks=[[int(x) for x in t] for t in json.load(f)["tasks"]])
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise ValueError("%s: unreadable task list: %s" % (tasks_path, e)) from None
        _validate_taskspec(spec, c, tasks_path)
        ds.task_override = spec
    return ds


def write_dataset(path: str, ds: FeatureDataset) -> None:
    """Inverse of load_dataset; load(write(ds)) is bit-exact."""
    os.makedirs(path, exist_ok=True)
    meta = {
        "name": ds.name,
        "num_train": int(ds.features_train.shape[0]),
        "num_test": int(ds.features_test.shape[0]),
        "feature_dim": int(ds.feature_dim),
        "num_classes": int(ds.num_classes),
        "attr_dim": int(ds.attr_dim),
    }
    with open(os.path.join(path, "meta.json"), "w") as f:
        json.dump(meta, f, sort_keys=True, indent=2)
        f.write("\n")
    pairs = [
        ("features_train.f32", np.ascontiguousarray(ds.features_train, dtype="<f4")),
        ("features_test.f32", np.ascontiguousarray(ds.features_test, dtype="<f4")),
        ("attributes.f32", np.ascontiguousarray(ds.attributes, dtype="<f4")),
        ("labels_train.u32", np.ascontiguousarray(ds.labels_train, dtype="<u4")),
        ("labels_test.u32", np.ascontiguousarray(ds.labels_test, dtype="<u4")),
    ]
    for fname, arr in pairs:
        with open(os.path.join(path, fname), "wb") as f:
            f.write(arr.tobytes())
    if ds.task_override is not None:
        with open(os.path.join(path, "tasks.json"), "w") as f:
            json.dump({"tasks": [[int(c) for c in t] for t in ds.task_override.tasks]},
                      f, sort_keys=True, indent=2)
            f.write("\n")


def split_tasks(ds: FeatureDataset, num_tasks: int):
    """Partition classes into ordered tasks and build per-task sample views.

    Classes go into contiguous ascending blocks; when the count does not
    divide evenly the earliest tasks take one extra class. A tasks.json
    override in the container replaces the computed assignment (its length
    must then match num_tasks).
    """
    c = ds.num_classes
    if not (1 <= num_tasks <= c):
        raise ValueError("num_tasks must be in [1, %d], got %d" % (c, num_tasks))
    if ds.task_override is not None:
        if ds.task_override.num_tasks != num_tasks:
            raise ValueError("container pins %d tasks but %d were requested"
                             % (ds.task_override.num_tasks, num_tasks))
        spec = TaskSpec(tasks=[list(t) for t in ds.task_override.tasks])
    else:
        base, extra = divmod(c, num_tasks)
        tasks = []
        start = 0
        for i in range(num_tasks):
            size = base + (1 if i < extra else 0)
            tasks.append(list(range(start, start + size)))
            start += size
        spec = TaskSpec(tasks=tasks)
    views = []
    for i, classes in enumerate(spec.tasks):
        member = np.isin(ds.labels_train, classes)
        member_te = np.isin(ds.labels_test, classes)
        views.append(TaskView(
            task_index=i + 1,
            classes=list(classes),
            train_indices=np.nonzero(member)[0],
            test_indices=np.nonzero(member_te)[0],
        ))
    return spec, views


def seen_unseen_partition(spec: TaskSpec, t: int):
    """Classes of tasks 1..t versus everything after; sorted lists."""
    if not (0 <= t <= spec.num_tasks):
        raise ValueError("t must be in [0, %d], got %d" % (spec.num_tasks, t))
    seen = sorted(c for task in spec.tasks[:t] for c in task)
    unseen = sorted(c for task in spec.tasks[t:] for c in task)
    return seen, unseen


def make_synthetic_dataset(spec: SyntheticSpec) -> FeatureDataset:
    """Gaussian class clusters whose centers are linear in the attributes.

    The linear map makes attribute-driven transfer to held-out classes
    possible by construction. Test rows per class: max(1, spc // 5).
    """
    c, a, d = spec.num_classes, spec.attr_dim, spec.feature_dim
    if c < 2 or a <= 0 or d <= 0:
        raise ValueError("need num_classes >= 2 and positive dims")
    if spec.samples_per_class < 2:
        raise ValueError("samples_per_class must be >= 2 so a train/test split exists")
    if spec.cluster_noise < 0:
        raise ValueError("cluster_noise must be >= 0")
    attributes = rng_for(spec.seed, 1).normal(size=(c, a))
    if spec.attribute_to_mean_map is not None:
        amap = np.asarray(spec.attribute_to_mean_map, dtype=np.float64)
        if amap.shape != (a, d):
            raise ValueError("attribute_to_mean_map must be %r, got %r"
                             % ((a, d), amap.shape))
    else:
        amap = rng_for(spec.seed, 2).normal(size=(a, d)) / np.sqrt(a)
    means = attributes @ amap
    n_test = max(1, spec.samples_per_class // 5)
    n_train = spec.samples_per_class - n_test
    noise_rng = rng_for(spec.seed, 3)
    tr_feats, tr_labels, te_feats, te_labels = [], [], [], []
    for cls in range(c):
        block = means[cls] + spec.cluster_noise * noise_rng.normal(
            size=(spec.samples_per_class, d))
        tr_feats.append(block[:n_train])
        te_feats.append(block[n_train:])
        tr_labels.append(np.full(n_train, cls, dtype=np.int64))
        te_labels.append(np.full(n_test, cls, dtype=np.int64))
    return FeatureDataset(
        name="synthetic-%d" % spec.seed,
        features_train=np.concatenate(tr_feats).astype(np.float32),
        labels_train=np.concatenate(tr_labels),
        features_test=np.concatenate(te_feats).astype(np.float32),
        labels_test=np.concatenate(te_labels),
        attributes=attributes.astype(np.float32),
    )
