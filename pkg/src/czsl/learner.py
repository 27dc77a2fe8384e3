"""Task-sequential training: one generative module per task plus replay.

The flow per task: synthesize replacement data for every previously seen
class from the frozen module that owns it, mix that with the new task's
real rows, train a fresh module on the weighted composite loss, freeze
it, append it. Earlier modules are never touched again.

After training task t, a classifier training set can be synthesized for
all classes: unseen classes always come from module t (conditioned on
their attribute rows), seen classes come either from module t as well
(default, the route that makes replay's effect on old-task accuracy
visible) or from each class's owning module (config switch).

Learner checkpoint directory: manifest.json plus one module container
per task (module_001.ckpt, ...).
"""

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from czsl import cvae, nn
from czsl.data import FeatureDataset, TaskSpec, TaskView, seen_unseen_partition
from czsl.seeding import rng_for

_SYNTH_SOURCES = ("current", "owner")
_AVERAGES = ("class", "sample")


@dataclass
class TrainConfig:
    epochs: int = 101
    classifier_epochs: int = 25
    lr: float = 1e-4
    classifier_lr: float = 1e-4
    n_replay_per_class: int = 50
    n_classifier_per_class: int = 150
    z_dim: int = 50
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0
    lambda4: float = 1.0
    use_aux_losses: bool = True
    batch_size: int = 64
    seed: int = 0
    enc_hidden: tuple = (512,)
    dec_hidden: tuple = (512,)
    aux_hidden: tuple = (256,)
    classifier_hidden: tuple = (512,)
    classifier_activation: str = "relu"
    classifier_synthesis: str = "current"
    accuracy_average: str = "class"

    def __post_init__(self):
        for name in ("epochs", "classifier_epochs", "n_classifier_per_class",
                     "z_dim", "batch_size"):
            if int(getattr(self, name)) <= 0:
                raise ValueError("%s must be positive" % name)
        if self.n_replay_per_class < 0:
            raise ValueError("n_replay_per_class must be >= 0")
        for name in ("lambda1", "lambda2", "lambda3", "lambda4"):
            if float(getattr(self, name)) < 0:
                raise ValueError("%s must be nonnegative" % name)
        if self.classifier_synthesis not in _SYNTH_SOURCES:
            raise ValueError("classifier_synthesis must be one of %r" % (_SYNTH_SOURCES,))
        if self.classifier_activation not in ("relu", "identity"):
            raise ValueError("classifier_activation must be 'relu' or 'identity'")
        if self.accuracy_average not in _AVERAGES:
            raise ValueError("accuracy_average must be one of %r" % (_AVERAGES,))
        for name in ("enc_hidden", "dec_hidden", "aux_hidden", "classifier_hidden"):
            setattr(self, name, tuple(int(h) for h in getattr(self, name)))

    def loss_weights(self):
        """(w_ce, w_vae, w_label, w_embed); aux toggle zeroes the last two."""
        if self.use_aux_losses:
            return (self.lambda1, self.lambda2, self.lambda3, self.lambda4)
        return (self.lambda1, self.lambda2, 0.0, 0.0)


def config_to_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    for key in ("enc_hidden", "dec_hidden", "aux_hidden", "classifier_hidden"):
        d[key] = list(d[key])
    return d


def config_from_dict(d: dict) -> TrainConfig:
    return TrainConfig(**d)


@dataclass
class LearnerState:
    dataset: FeatureDataset
    spec: TaskSpec
    config: TrainConfig
    modules: list = field(default_factory=list)

    @property
    def tasks_trained(self) -> int:
        return len(self.modules)


@dataclass
class ReplayBuffer:
    features: np.ndarray
    labels: np.ndarray
    embeddings: np.ndarray

    def __len__(self):
        return self.features.shape[0]


def new_learner(dataset: FeatureDataset, spec: TaskSpec, config: TrainConfig) -> LearnerState:
    return LearnerState(dataset=dataset, spec=spec, config=config)


def _owner_map(spec: TaskSpec) -> dict:
    return {int(c): ti for ti, task in enumerate(spec.tasks, start=1) for c in task}


def total_loss(losses: cvae.LossBreakdown, weights) -> float:
    """Weighted sum of the components; weights order (ce, vae, label, embed)."""
    w_ce, w_vae, w_label, w_embed = (float(w) for w in weights)
    return (w_ce * losses.cross_entropy + w_vae * losses.vae
            + w_label * losses.label_mse + w_embed * losses.embed_mse)


def build_replay(state: LearnerState, n_per_class: int, seed) -> ReplayBuffer:
    """Synthesize n_per_class rows for every class of every trained task.

    Each class is generated by the module that owns it, in task order then
    ascending class order, so the buffer layout is deterministic.
    """
    d = state.dataset.feature_dim
    a = state.dataset.attr_dim
    feats, labels, embs = [], [], []
    attrs = np.asarray(state.dataset.attributes, dtype=np.float64)
    for module in state.modules:
        for c in sorted(module.owned_classes):
            if n_per_class == 0:
                continue
            x, y = cvae.generate(module, c, attrs[c], n_per_class,
                                 seed=(seed, module.task_id, c, 40))
            feats.append(x)
            labels.append(y)
            embs.append(np.repeat(attrs[c][None, :], n_per_class, axis=0))
    if not feats:
        return ReplayBuffer(features=np.zeros((0, d)), labels=np.zeros(0, dtype=np.int64),
                            embeddings=np.zeros((0, a)))
    return ReplayBuffer(features=np.concatenate(feats),
                        labels=np.concatenate(labels),
                        embeddings=np.concatenate(embs))


def train_task(state: LearnerState, task: TaskView, on_epoch=None) -> LearnerState:
    """Train the next task's module on real rows plus replay, freeze, append.

    on_epoch, when given, is called as on_epoch(task_index, epoch, means)
    after each epoch with the sequential means of the batch losses
    ('total', 'cross_entropy', 'recon', 'kl', 'vae', 'label_mse',
    'embed_mse').
    """
    cfg = state.config
    ds = state.dataset
    if task.task_index != state.tasks_trained + 1:
        raise ValueError("expected task %d next, got task %d"
                         % (state.tasks_trained + 1, task.task_index))
    if task.train_indices.size == 0:
        raise ValueError("task %d has no training samples" % task.task_index)

    replay = build_replay(state, cfg.n_replay_per_class,
                          seed=(cfg.seed, task.task_index, 3))
    attrs = np.asarray(ds.attributes, dtype=np.float64)
    real_x = np.asarray(ds.features_train[task.train_indices], dtype=np.float64)
    real_y = ds.labels_train[task.train_indices]
    x_all = np.concatenate([real_x, replay.features])
    y_all = np.concatenate([real_y, replay.labels])
    e_all = np.concatenate([attrs[real_y], replay.embeddings])

    module = cvae.cvae_init(
        task_id=task.task_index, owned_classes=task.classes,
        feature_dim=ds.feature_dim, attr_dim=ds.attr_dim,
        num_classes=ds.num_classes, z_dim=cfg.z_dim,
        enc_hidden=cfg.enc_hidden, dec_hidden=cfg.dec_hidden,
        aux_hidden=cfg.aux_hidden, seed=cfg.seed)
    states = {net: nn.adam_init(getattr(module, net), lr=cfg.lr)
              for net in ("encoder", "decoder", "aux")}
    weights = cfg.loss_weights()
    n = x_all.shape[0]

    for epoch in range(cfg.epochs):
        order = rng_for(cfg.seed, task.task_index, epoch, 0).permutation(n)
        sums = {k: 0.0 for k in ("total", "cross_entropy", "recon", "kl",
                                 "vae", "label_mse", "embed_mse")}
        batches = 0
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            noise = rng_for(cfg.seed, task.task_index, epoch, bi, 1).standard_normal(
                (idx.size, cfg.z_dim))
            losses, tot, enc_g, dec_g, aux_g = cvae.cvae_backward(
                module, x_all[idx], y_all[idx], e_all[idx], noise, weights)
            for net, g in (("encoder", enc_g), ("decoder", dec_g), ("aux", aux_g)):
                p, s = nn.adam_step(getattr(module, net), g, states[net])
                setattr(module, net, p)
                states[net] = s
            sums["total"] += tot
            sums["cross_entropy"] += losses.cross_entropy
            sums["recon"] += losses.recon
            sums["kl"] += losses.kl
            sums["vae"] += losses.vae
            sums["label_mse"] += losses.label_mse
            sums["embed_mse"] += losses.embed_mse
            batches += 1
        if on_epoch is not None:
            on_epoch(task.task_index, epoch,
                     {k: v / batches for k, v in sums.items()})

    cvae.freeze(module)
    return LearnerState(dataset=ds, spec=state.spec, config=cfg,
                        modules=list(state.modules) + [module])


def synthesize_classifier_set(state: LearnerState, t: int, n_per_class: int, seed):
    """Synthetic training set covering all classes known at time t.

    Unseen classes (tasks after t) are generated by module t from their
    attribute rows. Seen classes come from module t too by default, or
    from their owning modules under classifier_synthesis='owner'. At t=T
    there are no unseen classes and the set covers the seen ones only.
    Returns (features, labels).
    """
    if not (1 <= t <= state.tasks_trained):
        raise ValueError("t must be in [1, %d], got %d" % (state.tasks_trained, t))
    seen, unseen = seen_unseen_partition(state.spec, t)
    owners = _owner_map(state.spec)
    current = state.modules[t - 1]
    attrs = np.asarray(state.dataset.attributes, dtype=np.float64)
    feats, labels = [], []
    for c in seen:
        if state.config.classifier_synthesis == "owner":
            source = state.modules[owners[c] - 1]
        else:
            source = current
        x, y = cvae.generate(source, c, attrs[c], n_per_class, seed=(seed, t, c, 50))
        feats.append(x)
        labels.append(y)
    for c in unseen:
        x, y = cvae.generate(current, c, attrs[c], n_per_class, seed=(seed, t, c, 50))
        feats.append(x)
        labels.append(y)
    return np.concatenate(feats), np.concatenate(labels)


def save_learner(state: LearnerState, dirpath) -> None:
    os.makedirs(dirpath, exist_ok=True)
    names = []
    for i, module in enumerate(state.modules, start=1):
        name = "module_%03d.ckpt" % i
        cvae.save_module(os.path.join(dirpath, name), module)
        names.append(name)
    manifest = {
        "dataset_name": state.dataset.name,
        "tasks_trained": state.tasks_trained,
        "tasks": [[int(c) for c in task] for task in state.spec.tasks],
        "config": config_to_dict(state.config),
        "modules": names,
    }
    with open(os.path.join(dirpath, "manifest.json"), "w") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")


def load_learner(dirpath, dataset: FeatureDataset) -> LearnerState:
    manifest_path = os.path.join(dirpath, "manifest.json")
    try:
        with open(manifest_path) as f:
            manifest = json.load(f)
    except FileNotFoundError:
        raise FileNotFoundError("missing manifest: %s" % manifest_path) from None
    if manifest["dataset_name"] != dataset.name:
        raise ValueError("checkpoint was trained on %r, got dataset %r"
                         % (manifest["dataset_name"], dataset.name))
    modules = [cvae.load_module(os.path.join(dirpath, name))
               for name in manifest["modules"]]
    if len(modules) != int(manifest["tasks_trained"]):
        raise ValueError("manifest claims %d modules, found %d"
                         % (int(manifest["tasks_trained"]), len(modules)))
    return LearnerState(
        dataset=dataset,
        spec=TaskSpec(tasks=[[int(c) for c in task] for task in manifest["tasks"]]),
        config=config_from_dict(manifest["config"]),
        modules=modules,
    )
