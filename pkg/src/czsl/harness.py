"""Experiment driver: config, end-to-end runs, report emission, sweeps.

A run covers one or more seeds. Each seed executes the full task
sequence (train module -> synthesize classifier set -> train classifier
-> evaluate) and produces one MetricsReport. Reports land in three
byte-stable files (per_task.csv, summary.json, curves.csv) plus
run_info.json for the non-deterministic extras (wall clock, backend).

Synthetic datasets are regenerated per run seed, so seed-to-seed
variation covers both the data draw and the training randomness. A
dataset loaded from disk is shared by all seeds.

Emitted accuracies are percentages with 2 decimal places; everything
upstream stays in [0, 1].
"""

import csv
import dataclasses
import json
import logging
import os
import time
from dataclasses import dataclass, field

from czsl import classifier, data, learner, metrics
from czsl.kernels import BACKEND

log = logging.getLogger("czsl.harness")

_SPEC_FIELDS = ("num_classes", "attr_dim", "feature_dim", "samples_per_class",
                "cluster_noise", "seed")


def default_synthetic_spec() -> data.SyntheticSpec:
    """The 16-class linear benchmark used by the ablation studies."""
    return data.SyntheticSpec(num_classes=16, attr_dim=8, feature_dim=32,
                              samples_per_class=60, cluster_noise=0.3, seed=1)


def benchmark_train_config(**overrides) -> learner.TrainConfig:
    """Training config calibrated for the synthetic benchmark.

    Reaches high seen and unseen accuracy in about two seconds per run;
    the full-size defaults of TrainConfig are meant for real feature
    sets and are much slower than this benchmark needs.
    """
    base = dict(epochs=40, classifier_epochs=25, lr=1e-3, classifier_lr=1e-3,
                n_replay_per_class=50, n_classifier_per_class=100, z_dim=8,
                batch_size=64, seed=0, enc_hidden=(64,), dec_hidden=(64,),
                aux_hidden=(32,), classifier_hidden=(64,))
    base.update(overrides)
    return learner.TrainConfig(**base)


@dataclass
class ExperimentConfig:
    dataset_path: "str | None" = None
    synthetic: "data.SyntheticSpec | None" = None
    num_tasks: int = 4
    train: learner.TrainConfig = field(default_factory=learner.TrainConfig)
    seeds: tuple = (0,)
    out_dir: "str | None" = None

    def __post_init__(self):
        if self.dataset_path is not None and self.synthetic is not None:
            raise ValueError("give dataset_path or synthetic, not both")
        if self.dataset_path is None and self.synthetic is None:
            self.synthetic = default_synthetic_spec()
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("need at least one seed")
        if int(self.num_tasks) < 1:
            raise ValueError("num_tasks must be positive")


def experiment_config_to_dict(cfg: ExperimentConfig) -> dict:
    synth = None
    if cfg.synthetic is not None:
        synth = {name: getattr(cfg.synthetic, name) for name in _SPEC_FIELDS}
    return {
        "dataset_path": cfg.dataset_path,
        "synthetic": synth,
        "num_tasks": cfg.num_tasks,
        "train": learner.config_to_dict(cfg.train),
        "seeds": list(cfg.seeds),
    }


def experiment_config_from_dict(d: dict) -> ExperimentConfig:
    """Build a config from a plain dict; {} reproduces the defaults."""
    known = {"dataset_path", "synthetic", "num_tasks", "train", "seeds"}
    unknown = set(d) - known
    if unknown:
        raise ValueError("unknown config keys: %s" % ", ".join(sorted(unknown)))
    kw = {}
    if d.get("dataset_path") is not None:
        kw["dataset_path"] = str(d["dataset_path"])
    if d.get("synthetic") is not None:
        kw["synthetic"] = data.SyntheticSpec(**d["synthetic"])
    if "num_tasks" in d:
        kw["num_tasks"] = int(d["num_tasks"])
    if "train" in d:
        kw["train"] = learner.config_from_dict(d["train"])
    if "seeds" in d:
        kw["seeds"] = tuple(d["seeds"])
    return ExperimentConfig(**kw)


@dataclass
class SeedResult:
    seed: int
    report: metrics.MetricsReport
    wall_seconds: float


@dataclass
class RunRecord:
    config: ExperimentConfig
    results: list
    module_param_counts: list

    @property
    def reports(self):
        return [r.report for r in self.results]


def _dataset_for_seed(cfg: ExperimentConfig, seed: int, cached=None):
    if cfg.dataset_path is not None:
        if cached is None:
            cached = data.load_dataset(cfg.dataset_path)
        return cached, cached
    spec = dataclasses.replace(cfg.synthetic, seed=seed)
    return data.make_synthetic_dataset(spec), cached


def _module_param_count(module) -> int:
    return (module.encoder.num_params() + module.decoder.num_params()
            + module.aux.num_params())


def run_seed(cfg: ExperimentConfig, dataset, seed: int):
    """One full task sequence for one seed; returns (report, state)."""
    train_cfg = dataclasses.replace(cfg.train, seed=seed)
    spec, views = data.split_tasks(dataset, cfg.num_tasks)
    state = learner.new_learner(dataset, spec, train_cfg)
    per_task = []
    for view in views:
        t = view.task_index
        try:
            state = learner.train_task(state, view)
            synth_x, synth_y = learner.synthesize_classifier_set(
                state, t, train_cfg.n_classifier_per_class,
                seed=(train_cfg.seed, t, 60))
            clf = classifier.train_classifier(
                synth_x, synth_y, dataset.num_classes, train_cfg,
                seed=(train_cfg.seed, t, 61), task_index=t)
            per_task.append(metrics.evaluate_after_task(
                clf, dataset, spec, t, average=train_cfg.accuracy_average))
        except Exception as err:
            raise RuntimeError("seed %d, task %d: %s" % (seed, t, err)) from err
        log.info("seed %d task %d: seen %.4f unseen %s", seed, t,
                 per_task[-1].seen_acc,
                 "-" if per_task[-1].unseen_acc is None
                 else "%.4f" % per_task[-1].unseen_acc)
    return metrics.summarize(per_task), state


def run_experiment(cfg: ExperimentConfig, save_learners=False) -> RunRecord:
    """Execute all seeds; emit reports when cfg.out_dir is set.

    save_learners additionally writes each seed's final learner state to
    out_dir/learner_seed_<s>/ so `eval` can rerun it later.
    """
    if save_learners and cfg.out_dir is None:
        raise ValueError("save_learners needs an output directory")
    results = []
    param_counts = []
    cached = None
    for seed in cfg.seeds:
        dataset, cached = _dataset_for_seed(cfg, seed, cached)
        start = time.perf_counter()
        report, state = run_seed(cfg, dataset, seed)
        wall = time.perf_counter() - start
        results.append(SeedResult(seed=seed, report=report, wall_seconds=wall))
        if save_learners:
            learner.save_learner(
                state, os.path.join(cfg.out_dir, "learner_seed_%d" % seed))
        if not param_counts:
            param_counts = [_module_param_count(m) for m in state.modules]
        log.info("seed %d done in %.1fs: msa %.4f mua %.4f mh %.4f",
                 seed, wall, report.msa, report.mua, report.mh)
    record = RunRecord(config=cfg, results=results,
                       module_param_counts=param_counts)
    if cfg.out_dir is not None:
        emit_report(record, cfg.out_dir)
    return record


def _pct(v: float) -> float:
    return round(v * 100.0, 2)


def emit_report(record: RunRecord, dirpath) -> None:
    """Write per_task.csv, summary.json, curves.csv, run_info.json.

    The first three are byte-stable for identical (dataset, config,
    seed); run_info.json carries wall-clock times and the active
    backend, which may vary between reruns.
    """
    os.makedirs(dirpath, exist_ok=True)

    with open(os.path.join(dirpath, "per_task.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["seed", "task", "seen_acc", "unseen_acc", "harmonic"])
        for res in record.results:
            for m in res.report.per_task:
                w.writerow([
                    res.seed, m.t, "%.2f" % _pct(m.seen_acc),
                    "" if m.unseen_acc is None else "%.2f" % _pct(m.unseen_acc),
                    "" if m.harmonic is None else "%.2f" % _pct(m.harmonic),
                ])

    with open(os.path.join(dirpath, "curves.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["seed", "task", "metric", "value"])
        for res in record.results:
            for m in res.report.per_task:
                w.writerow([res.seed, m.t, "seen_acc", "%.2f" % _pct(m.seen_acc)])
                if m.unseen_acc is not None:
                    w.writerow([res.seed, m.t, "unseen_acc",
                                "%.2f" % _pct(m.unseen_acc)])
                    w.writerow([res.seed, m.t, "harmonic",
                                "%.2f" % _pct(m.harmonic)])

    def seq_mean(values):
        total = 0.0
        for v in values:
            total += v
        return total / len(values)

    summary = {
        "config": experiment_config_to_dict(record.config),
        "mean": {
            "msa": _pct(seq_mean([r.report.msa for r in record.results])),
            "mua": _pct(seq_mean([r.report.mua for r in record.results])),
            "mh": _pct(seq_mean([r.report.mh for r in record.results])),
        },
        "per_seed": [
            {"seed": r.seed, "msa": _pct(r.report.msa),
             "mua": _pct(r.report.mua), "mh": _pct(r.report.mh)}
            for r in record.results
        ],
    }
    with open(os.path.join(dirpath, "summary.json"), "w") as f:
        json.dump(summary, f, sort_keys=True, indent=2)
        f.write("\n")

    info = {
        "backend": BACKEND,
        "module_param_counts": list(record.module_param_counts),
        "wall_seconds": {str(r.seed): round(r.wall_seconds, 3)
                         for r in record.results},
    }
    with open(os.path.join(dirpath, "run_info.json"), "w") as f:
        json.dump(info, f, sort_keys=True, indent=2)
        f.write("\n")


def sweep_replay(cfg: ExperimentConfig, grid=(0, 10, 20, 30, 40, 50, 60)):
    """Rerun the experiment per replay count; one summary row each.

    Returns [(n, RunRecord), ...]. With cfg.out_dir set, each setting
    lands in out_dir/replay_<n>/ and a top-level sweep.csv collects the
    mean metrics per setting.
    """
    rows = []
    out = []
    for n in grid:
        sub_out = None
        if cfg.out_dir is not None:
            sub_out = os.path.join(cfg.out_dir, "replay_%d" % n)
        sub = dataclasses.replace(
            cfg, train=dataclasses.replace(cfg.train, n_replay_per_class=int(n)),
            out_dir=sub_out)
        record = run_experiment(sub)
        out.append((int(n), record))

        def seq_mean(values):
            total = 0.0
            for v in values:
                total += v
            return total / len(values)

        rows.append([int(n),
                     "%.2f" % _pct(seq_mean([r.msa for r in record.reports])),
                     "%.2f" % _pct(seq_mean([r.mua for r in record.reports])),
                     "%.2f" % _pct(seq_mean([r.mh for r in record.reports]))])
    if cfg.out_dir is not None:
        os.makedirs(cfg.out_dir, exist_ok=True)
        with open(os.path.join(cfg.out_dir, "sweep.csv"), "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["n_replay_per_class", "msa", "mua", "mh"])
            w.writerows(rows)
    return out
