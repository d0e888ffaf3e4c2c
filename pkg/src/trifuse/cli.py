"""``trifuse`` command line: one executable, one subcommand per task.

Every verb that takes ``--out`` writes a ``manifest.json`` there holding the
resolved configuration, the seed and a build id, next to its other outputs.
Nothing time- or host-dependent is written, so re-running a verb with the same
configuration and seed reproduces its files byte for byte.

Exit codes: 0 success, 1 verification failure, 2 configuration error (this
includes dimension mismatches), 3 I/O error, 4 numerical divergence.
"""
from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .errors import ConfigError, DimensionError, DivergenceError, OracleScaleError
from .paralind import (check_slicing, count_attention_params, count_decomposed_params, count_full_params,
                       count_joint_params)
from .tasks.data import generate_splits, read_jsonl, write_jsonl
from .tasks.io import dump_json, load_checkpoint, save_checkpoint, write_metrics_csv
from .tasks.train import evaluate, train

__all__ = ["main", "build_id", "EXIT_OK", "EXIT_VERIFY", "EXIT_CONFIG", "EXIT_IO", "EXIT_DIVERGENCE"]

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_IO, EXIT_DIVERGENCE = 0, 1, 2, 3, 4
QUOTED_RATE = 65280

log = logging.getLogger("trifuse")


def build_id() -> str:
    """``trifuse-<version>-g<hash>``, the hash taken over the package sources."""
    h = hashlib.sha256()
    root = Path(__file__).resolve().parent
    for path in sorted(root.rglob("*.py")):
        h.update(path.relative_to(root).as_posix().encode())
        h.update(path.read_bytes())
    return f"trifuse-{__version__}-g{h.hexdigest()[:12]}"


@contextlib.contextmanager
def _threads(deterministic: bool):
    from threadpoolctl import threadpool_limits

    if deterministic:
        limit = 1
    else:
        env = os.environ.get("TRIFUSE_THREADS")
        limit = int(env) if env else None
    if limit is None:
        yield
        return
    with threadpool_limits(limits=limit):
        yield


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_overrides("data", seed=args.seed).with_overrides("training", seed=args.seed)
    return cfg


def _out_dir(args, cfg: RunConfig) -> Path | None:
    out = getattr(args, "out", None) or cfg.paths.get("out")
    if out is None:
        return None
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require_out(args, cfg) -> Path:
    out = _out_dir(args, cfg)
    if out is None:
        raise ConfigError(f"{args.verb} needs an output directory: pass --out or set [paths] out")
    return out


def _write_manifest(out: Path, args, cfg: RunConfig, seed, outputs, **extra):
    manifest = {"verb": args.verb, "build": build_id(), "seed": seed, "config": cfg.to_dict(),
                "deterministic": args.deterministic, "outputs": sorted(outputs), **extra}
    dump_json(manifest, out / "manifest.json")


def _data_dir(args, cfg) -> Path:
    data = getattr(args, "data", None) or cfg.paths.get("data")
    if data is None:
        raise ConfigError("no dataset given: pass --data or set [paths] data")
    return Path(data)


def _load_split(data_dir: Path, split: str):
    path = data_dir / f"{split}.jsonl"
    if not path.exists():
        raise FileNotFoundError(f"dataset file {path} does not exist; run `trifuse gen-data --out {data_dir}` first")
    return read_jsonl(path)


# verbs ---------------------------------------------------------------------

def cmd_verify(args) -> int:
    from .verify import run_all

    cfg = _config(args)
    seed = args.seed if args.seed is not None else 0
    report = run_all(n_cases=args.cases, seed=seed, perturb=args.inject_error)
    print(report.format())
    out = _out_dir(args, cfg)
    if out is not None:
        (out / "verify.json").write_text(report.to_json(), encoding="utf-8")
        _write_manifest(out, args, cfg, seed, ["verify.json"], cases=args.cases, inject_error=args.inject_error)
    return EXIT_OK if report.passed else EXIT_VERIFY


def _params_rows(n, d, d_z, Rs):
    full = count_full_params(n, d, d_z)
    rows = []
    for R in Rs:
        factor_term, core_term = count_attention_params(d, R)
        dec = count_decomposed_params(d, d_z, R)
        rows.append({"R": R, "full": full, "decomposed": dec, "rate": full / dec, "factor_term": factor_term,
                     "core_term": core_term, "joint_term": count_joint_params(d, d_z)})
    return rows


def cmd_params(args) -> int:
    cfg = _config(args)
    spec = cfg.data_spec()
    n = tuple(args.n) if args.n else spec.channels
    d = tuple(args.d) if args.d else spec.dims
    d_z = args.d_z if args.d_z is not None else cfg.train_config().d_z
    Rs = args.R or [cfg.train_config().R]
    for R in Rs:
        check_slicing(d, R)
    rows = _params_rows(n, d, d_z, Rs)
    print(f"n = {n}, d = {d}, d_z = {d_z}")
    print(f"{'R':>4s} {'full':>22s} {'decomposed':>14s} {'rate':>16s} {'factors':>12s} {'cores':>12s} "
          f"{'joint':>12s}")
    for r in rows:
        print(f"{r['R']:4d} {r['full']:22d} {r['decomposed']:14d} {r['rate']:16.2f} {r['factor_term']:12d} "
              f"{r['core_term']:12d} {r['joint_term']:12d}")
    quoted = None
    if args.quoted:
        full_q, dec_q = args.quoted
        ratio = full_q / dec_q
        dev = abs(ratio - args.quoted_rate) / args.quoted_rate
        quoted = {"full": full_q, "decomposed": dec_q, "ratio": ratio, "rate": args.quoted_rate,
                  "relative_deviation": dev}
        print(f"quoted counts {full_q:.6g} / {dec_q:.6g} = {ratio:.2f}; "
              f"deviation from quoted rate {args.quoted_rate:g}: {100 * dev:.4f}%")
    out = _out_dir(args, cfg)
    if out is not None:
        dump_json({"n": list(n), "d": list(d), "d_z": d_z, "rows": rows, "quoted": quoted}, out / "params.json")
        _write_manifest(out, args, cfg, None, ["params.json"])
    return EXIT_OK


def cmd_gen_data(args) -> int:
    cfg = _config(args)
    out = _require_out(args, cfg)
    spec = cfg.data_spec()
    train_set, test_set = generate_splits(spec, cfg.data_seed)
    write_jsonl(train_set, out / "train.jsonl")
    write_jsonl(test_set, out / "test.jsonl")
    _write_manifest(out, args, cfg, cfg.data_seed, ["train.jsonl", "test.jsonl"], data_spec=spec.to_dict())
    print(f"wrote {len(train_set)} train and {len(test_set)} test {spec.task} examples to {out}")
    return EXIT_OK


def _run_training(args, kind, teacher=None, teacher_path=None) -> int:
    cfg = _config(args)
    out = _require_out(args, cfg)
    data_dir = _data_dir(args, cfg)
    train_set, test_set = _load_split(data_dir, "train"), _load_split(data_dir, "test")
    tcfg = cfg.train_config()
    overrides = {k: v for k, v in (("epochs", args.epochs), ("step_size", args.step_size)) if v is not None}
    if overrides:
        tcfg = type(tcfg)(**{**tcfg.to_dict(), **overrides})

    def progress(row):
        log.info("epoch %d loss %.6f acc %s", row["epoch"], row["loss"], row.get("acc"))

    result = train(kind, tcfg, train_set, test_set, teacher=teacher, on_epoch=progress)
    meta = {"train_config": tcfg.to_dict(), "data": str(data_dir)}
    save_checkpoint(out / "checkpoint.json", result.model, kind, train_set.task, meta)
    write_metrics_csv(result.history, out / "metrics.csv")
    extra = {"kind": kind, "data": str(data_dir), "train_config": tcfg.to_dict()}
    if kind == "distilled-student":
        extra.update(teacher=str(teacher_path), alpha=tcfg.alpha, temperature=tcfg.temperature)
    _write_manifest(out, args, cfg, tcfg.seed, ["checkpoint.json", "metrics.csv"], **extra)
    last = result.history[-1]
    print(f"{kind}: final loss {last['loss']:.6f}, test acc {last.get('acc', float('nan')):.4f}, "
          f"ari {last.get('ari', float('nan')):.4f}, har {last.get('har', float('nan')):.4f}")
    return EXIT_OK


def cmd_train_teacher(args) -> int:
    return _run_training(args, "cti-teacher")


def cmd_train_student(args) -> int:
    kind = args.kind
    if kind is None:
        kind = "bilinear-student" if _config(args).data_spec().task == "ffoe" else "pair-baseline"
    return _run_training(args, kind)


def cmd_distill(args) -> int:
    cfg = _config(args)
    cfg.require_alpha()
    teacher_path = args.teacher or cfg.paths.get("teacher")
    if teacher_path is None:
        raise ConfigError("distill needs a teacher checkpoint: pass --teacher or set [paths] teacher")
    if not Path(teacher_path).exists():
        raise FileNotFoundError(f"teacher checkpoint {teacher_path} does not exist; "
                                "train one with `trifuse train-teacher` first")
    teacher, header = load_checkpoint(teacher_path)
    if header.get("kind") != "cti-teacher":
        raise ConfigError(f"{teacher_path} holds a {header.get('kind')!r} model, not a cti-teacher")
    return _run_training(args, "distilled-student", teacher=teacher, teacher_path=teacher_path)


def _checkpoint_path(args, cfg):
    path = args.checkpoint or cfg.paths.get("checkpoint")
    if path is None:
        raise ConfigError(f"{args.verb} needs --checkpoint or [paths] checkpoint")
    if not Path(path).exists():
        raise FileNotFoundError(f"checkpoint {path} does not exist")
    return path


def cmd_eval(args) -> int:
    cfg = _config(args)
    path = _checkpoint_path(args, cfg)
    model, header = load_checkpoint(path)
    ds = _load_split(_data_dir(args, cfg), args.split)
    if ds.task != header.get("task"):
        raise ConfigError(f"checkpoint was trained on {header.get('task')!r} data, dataset is {ds.task!r}")
    rep = evaluate(model, ds)
    print(f"{header['kind']} on {args.split}: acc {rep.acc:.4f} ari {rep.ari:.4f} har {rep.har:.4f}")
    for name, acc in rep.per_type.items():
        print(f"  {name:<10s} {acc:.4f} ({rep.counts[name]} examples)")
    out = _out_dir(args, cfg)
    if out is not None:
        dump_json({"checkpoint": str(path), "split": args.split, "kind": header["kind"], **rep.as_row(),
                   "per_type": rep.per_type, "counts": rep.counts, "excluded": rep.excluded}, out / "eval.json")
        _write_manifest(out, args, cfg, None, ["eval.json"], checkpoint=str(path), split=args.split)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .gradsuite import GRADCHECK_TOL, format_gradchecks, run_gradchecks

    cfg = _config(args)
    seed = args.seed if args.seed is not None else 0
    reports = run_gradchecks(seed=seed, eps=args.eps)
    text = format_gradchecks(reports, GRADCHECK_TOL)
    print(text, end="")
    out = _out_dir(args, cfg)
    if out is not None:
        (out / "gradcheck.txt").write_text(text, encoding="utf-8")
        _write_manifest(out, args, cfg, seed, ["gradcheck.txt"], eps=args.eps)
    return EXIT_OK if all(r.passed(GRADCHECK_TOL) for r in reports.values()) else EXIT_VERIFY


def cmd_export_attention(args) -> int:
    from .cti import AttentionMap

    cfg = _config(args)
    out = _require_out(args, cfg)
    path = _checkpoint_path(args, cfg)
    model, header = load_checkpoint(path)
    if not hasattr(model, "attention"):
        raise ConfigError(f"{path} holds a {header.get('kind')!r} model without a triplet attention map")
    ds = _load_split(_data_dir(args, cfg), args.split)
    idx = args.index if args.index else list(range(min(5, len(ds))))
    if max(idx) >= len(ds) or min(idx) < 0:
        raise ConfigError(f"example index out of range for {len(ds)} examples")
    idx = np.asarray(idx)
    att = model.attention(ds.v[idx], ds.q[idx], ds.true_answers[idx])
    examples = []
    for e, w in zip(idx, att):
        amap = AttentionMap(w)
        examples.append({"index": int(e), "label": int(ds.labels[e]), "qtype": str(ds.qtypes[e]),
                         **amap.to_dict(), "top": [{"triplet": list(t), "weight": v} for t, v in amap.top(args.top)]})
    dump_json({"checkpoint": str(path), "split": args.split, "normalize": model.normalize, "axes": ["V", "Q", "A"],
               "examples": examples}, out / "attention.json")
    _write_manifest(out, args, cfg, None, ["attention.json"], checkpoint=str(path), split=args.split)
    print(f"exported {len(examples)} attention maps to {out / 'attention.json'}")
    return EXIT_OK


# parser --------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trifuse", description="Compact trilinear interaction toolkit.")
    p.add_argument("--version", action="version", version=build_id())
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="sectioned key = value run configuration")
    common.add_argument("--seed", type=int, help="overrides the data and training seeds")
    common.add_argument("--out", help="output directory (overrides [paths] out)")
    common.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True,
                        help="single-threaded numerics (default on); otherwise TRIFUSE_THREADS caps threads")
    common.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True, metavar="VERB")

    s = sub.add_parser("verify", parents=[common], help="run the oracle identity suites")
    s.add_argument("--cases", type=int, default=100, help="random instances per identity")
    s.add_argument("--inject-error", type=float, default=0.0,
                   help="testing hook: add this offset to the factorized results")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("params", parents=[common], help="parameter counts and decomposition rate")
    s.add_argument("--n", type=int, nargs=3, metavar=("NV", "NQ", "NA"), help="channels per input")
    s.add_argument("--d", type=int, nargs=3, metavar=("DV", "DQ", "DA"), help="feature dims")
    s.add_argument("--d-z", type=int)
    s.add_argument("--R", type=int, nargs="+", help="one or more slicing values")
    s.add_argument("--quoted", type=float, nargs=2, metavar=("FULL", "DECOMPOSED"),
                   help="also check the ratio of two quoted counts against --quoted-rate")
    s.add_argument("--quoted-rate", type=float, default=QUOTED_RATE)
    s.set_defaults(func=cmd_params)

    s = sub.add_parser("gen-data", parents=[common], help="write a synthetic train/test split")
    s.set_defaults(func=cmd_gen_data)

    for name, func, doc in (("train-teacher", cmd_train_teacher, "train the trilinear teacher"),
                            ("train-student", cmd_train_student, "train a hard-label student or pairwise baseline"),
                            ("distill", cmd_distill, "train the student against a frozen teacher")):
        s = sub.add_parser(name, parents=[common], help=doc)
        s.add_argument("--data", help="directory holding train.jsonl and test.jsonl")
        s.add_argument("--epochs", type=int)
        s.add_argument("--step-size", type=float, help="overrides [training] step_size")
        if name == "train-student":
            s.add_argument("--kind", choices=("bilinear-student", "pair-baseline"))
        if name == "distill":
            s.add_argument("--teacher", help="teacher checkpoint (overrides [paths] teacher)")
        s.set_defaults(func=func)

    s = sub.add_parser("eval", parents=[common], help="accuracy report of a checkpoint")
    s.add_argument("--checkpoint")
    s.add_argument("--data")
    s.add_argument("--split", choices=("train", "test"), default="test")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient report")
    s.add_argument("--eps", type=float, default=1e-5)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("export-attention", parents=[common], help="dump triplet attention maps as JSON")
    s.add_argument("--checkpoint")
    s.add_argument("--data")
    s.add_argument("--split", choices=("train", "test"), default="test")
    s.add_argument("--index", type=int, nargs="+", help="example indices (default: first five)")
    s.add_argument("--top", type=int, default=5, help="strongest triplets listed per example")
    s.set_defaults(func=cmd_export_attention)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _threads(args.deterministic):
            return args.func(args)
    except DivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ConfigError, DimensionError, OracleScaleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
