"""Command line front end.

Subcommands:
  run                 full experiment from a JSON config (empty = defaults)
  synth-data          materialize a synthetic dataset container
  eval                re-evaluate a saved learner checkpoint on a dataset
  sweep-replay        replay-count ablation over a grid
  inspect-checkpoint  print the identity of a checkpoint file or directory

Exit codes: 0 success, 2 usage errors (bad flags, missing/invalid
config), 1 runtime failures. CZSL_LOG_LEVEL controls verbosity
(DEBUG/INFO/WARNING/...; default WARNING).
"""

import argparse
import dataclasses
import json
import logging
import os
import sys

from czsl import classifier, cvae, data, harness, learner, metrics, nn


class UsageError(Exception):
    pass


def _load_experiment_config(path, args) -> harness.ExperimentConfig:
    if path is None:
        cfg = harness.ExperimentConfig()
    else:
        try:
            with open(path) as f:
                raw = json.load(f)
        except FileNotFoundError:
            raise UsageError("config file not found: %s" % path) from None
        except json.JSONDecodeError as err:
            raise UsageError("config is not valid JSON: %s" % err) from None
        try:
            cfg = harness.experiment_config_from_dict(raw)
        except (ValueError, TypeError) as err:
            raise UsageError("bad config: %s" % err) from None

    train = cfg.train
    if getattr(args, "epochs", None) is not None:
        train = dataclasses.replace(train, epochs=args.epochs)
    if getattr(args, "replay", None) is not None:
        train = dataclasses.replace(train, n_replay_per_class=args.replay)
    if getattr(args, "no_aux_losses", False):
        train = dataclasses.replace(train, use_aux_losses=False)
    cfg = dataclasses.replace(cfg, train=train)
    if getattr(args, "tasks", None) is not None:
        cfg = dataclasses.replace(cfg, num_tasks=args.tasks)
    if getattr(args, "seed", None):
        cfg = dataclasses.replace(cfg, seeds=tuple(args.seed))
    if getattr(args, "out", None) is not None:
        cfg = dataclasses.replace(cfg, out_dir=args.out)
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_experiment_config(args.config, args)
    if args.save_learner and cfg.out_dir is None:
        raise UsageError("--save-learner needs --out")
    record = harness.run_experiment(cfg, save_learners=args.save_learner)
    for res in record.results:
        r = res.report
        print("seed %d: msa %.2f mua %.2f mh %.2f (%.1fs)"
              % (res.seed, 100 * r.msa, 100 * r.mua, 100 * r.mh,
                 res.wall_seconds))
    if cfg.out_dir:
        print("reports written to %s" % cfg.out_dir)
    return 0


def _cmd_sweep_replay(args) -> int:
    cfg = _load_experiment_config(args.config, args)
    grid = args.grid or [0, 10, 20, 30, 40, 50, 60]
    for n, record in harness.sweep_replay(cfg, grid=grid):
        total = 0.0
        for r in record.reports:
            total += r.mh
        print("n_replay %3d: mean mh %.2f" % (n, 100 * total / len(record.reports)))
    if cfg.out_dir:
        print("sweep written to %s" % cfg.out_dir)
    return 0


def _cmd_synth_data(args) -> int:
    spec = data.SyntheticSpec(
        num_classes=args.classes, attr_dim=args.attr_dim,
        feature_dim=args.feature_dim, samples_per_class=args.samples,
        cluster_noise=args.noise, seed=args.seed)
    try:
        ds = data.make_synthetic_dataset(spec)
    except ValueError as err:
        raise UsageError(str(err)) from None
    if args.tasks is not None:
        spec_tasks, _ = data.split_tasks(ds, args.tasks)
        ds.task_override = spec_tasks
    data.write_dataset(args.out, ds)
    print("wrote %s (%d classes, %d train rows, %d test rows)"
          % (args.out, ds.num_classes, ds.features_train.shape[0],
             ds.features_test.shape[0]))
    return 0


def _cmd_eval(args) -> int:
    ds = data.load_dataset(args.data)
    state = learner.load_learner(args.checkpoint, ds)
    cfg = state.config
    per_task = []
    for t in range(1, state.tasks_trained + 1):
        synth_x, synth_y = learner.synthesize_classifier_set(
            state, t, cfg.n_classifier_per_class, seed=(cfg.seed, t, 60))
        clf = classifier.train_classifier(
            synth_x, synth_y, ds.num_classes, cfg, seed=(cfg.seed, t, 61),
            task_index=t)
        m = metrics.evaluate_after_task(clf, ds, state.spec, t,
                                        average=cfg.accuracy_average)
        per_task.append(m)
        print("task %d: seen %.2f unseen %s" % (
            t, 100 * m.seen_acc,
            "-" if m.unseen_acc is None else "%.2f" % (100 * m.unseen_acc)))
    if len(per_task) >= 2 and per_task[-1].unseen_acc is None:
        rep = metrics.summarize(per_task)
        print("msa %.2f mua %.2f mh %.2f"
              % (100 * rep.msa, 100 * rep.mua, 100 * rep.mh))
    return 0


def _describe_checkpoint(path) -> dict:
    if os.path.isdir(path):
        with open(os.path.join(path, "manifest.json")) as f:
            manifest = json.load(f)
        fps = []
        for name in manifest["modules"]:
            module = cvae.load_module(os.path.join(path, name))
            fps.append({"file": name, "task_id": module.task_id,
                        "owned_classes": module.owned_classes,
                        "fingerprint": cvae.module_fingerprint(module)})
        return {"kind": "learner", "dataset_name": manifest["dataset_name"],
                "tasks_trained": manifest["tasks_trained"], "modules": fps}
    with open(path, "rb") as f:
        magic = f.read(8)
    if magic == b"CVAECK01":
        m = cvae.load_module(path)
        return {"kind": "module", "task_id": m.task_id,
                "owned_classes": m.owned_classes, "frozen": m.frozen,
                "feature_dim": m.feature_dim, "attr_dim": m.attr_dim,
                "num_classes": m.num_classes, "z_dim": m.z_dim,
                "fingerprint": cvae.module_fingerprint(m)}
    if magic == b"MLPCK001":
        p, step = nn.load_params(path)
        return {"kind": "mlp", "layer_dims": p.layer_dims,
                "activations": p.activations, "adam_step": step,
                "num_params": p.num_params(),
                "fingerprint": nn.fingerprint(p)}
    raise UsageError("unrecognized checkpoint: %s" % path)


def _cmd_inspect(args) -> int:
    print(json.dumps(_describe_checkpoint(args.path), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="czsl",
        description="Continual zero-shot learning over feature vectors.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p):
        p.add_argument("--config", help="JSON experiment config; omitted = defaults")
        p.add_argument("--out", help="report directory")
        p.add_argument("--seed", type=int, action="append",
                       help="run seed, repeatable")
        p.add_argument("--replay", type=int,
                       help="override n_replay_per_class")
        p.add_argument("--no-aux-losses", action="store_true",
                       help="zero the label and embedding loss weights")
        p.add_argument("--tasks", type=int, help="override task count")
        p.add_argument("--epochs", type=int, help="override training epochs")

    p_run = sub.add_parser("run", help="train and evaluate all tasks")
    add_run_flags(p_run)
    p_run.add_argument("--save-learner", action="store_true",
                       help="save per-seed learner checkpoints under --out")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep-replay", help="replay-count ablation")
    add_run_flags(p_sweep)
    p_sweep.add_argument("--grid", type=int, nargs="+",
                         help="replay counts to sweep (default 0..60 by 10)")
    p_sweep.set_defaults(func=_cmd_sweep_replay)

    p_synth = sub.add_parser("synth-data", help="write a synthetic dataset")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--classes", type=int, default=16)
    p_synth.add_argument("--attr-dim", type=int, default=8)
    p_synth.add_argument("--feature-dim", type=int, default=32)
    p_synth.add_argument("--samples", type=int, default=60,
                         help="samples per class (train+test)")
    p_synth.add_argument("--noise", type=float, default=0.3)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--tasks", type=int,
                         help="also pin a contiguous task split in the container")
    p_synth.set_defaults(func=_cmd_synth_data)

    p_eval = sub.add_parser("eval", help="evaluate a saved learner")
    p_eval.add_argument("--checkpoint", required=True,
                        help="learner checkpoint directory")
    p_eval.add_argument("--data", required=True, help="dataset directory")
    p_eval.set_defaults(func=_cmd_eval)

    p_inspect = sub.add_parser("inspect-checkpoint",
                               help="describe a checkpoint file or directory")
    p_inspect.add_argument("--path", required=True)
    p_inspect.set_defaults(func=_cmd_inspect)
    return parser


def cli_main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    level = os.environ.get("CZSL_LOG_LEVEL", "WARNING").upper()
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        level = "WARNING"
    logging.basicConfig(
        level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as err:
        print("error: %s" % err, file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as err:
        print("error: %s" % err, file=sys.stderr)
        return 1


def main(argv=None) -> int:
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(cli_main())
