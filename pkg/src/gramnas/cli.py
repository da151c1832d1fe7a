"""Command-line interface: ``gramnas run | resume | sample | decode | stats``.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import rng as streams
from .datasets import load_csv_dataset, make_toy_dataset
from .engine import EvolutionConfig, checkpoint_load, evolve, latest_checkpoint
from .errors import ConfigMismatch, GramnasError, GrammarError, StructureError
from .evaluator import DenseEvaluator, SurrogateEvaluator
from .genotype import decode_individual, random_individual
from .grammar import load_grammar
from .phenotype import check_shapes, export_json, parse_rendered, render
from .stats import STATS_HEADER, aggregate_runs, pearson, read_stats_csv
from .structure import load_structure, validate_structure

log = logging.getLogger("gramnas")

RUN_KEYS = {"grammar_file", "structure_file", "evaluator", "out_dir"}
CONFIG_KEYS = set(EvolutionConfig.__dataclass_fields__)


class UsageError(Exception):
    """Bad input from the user; reported with exit status 2."""


# --- configuration ----------------------------------------------------------


def _resolve(base: Path, value: str) -> str:
    p = Path(value)
    return str(p if p.is_absolute() else (base / p).resolve())


def load_run_config(path: Path, overrides: Optional[dict] = None) -> dict:
    """Read a run config, resolve relative paths against its directory and apply flag overrides."""
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: top level must be an object")
    unknown = set(doc) - RUN_KEYS - CONFIG_KEYS
    if unknown:
        raise UsageError(f"{path}: unknown keys {sorted(unknown)}")
    for key in ("grammar_file", "structure_file", "evaluator"):
        if key not in doc:
            raise UsageError(f"{path}: missing {key!r}")
    base = path.parent
    doc["grammar_file"] = _resolve(base, doc["grammar_file"])
    doc["structure_file"] = _resolve(base, doc["structure_file"])
    ev = dict(doc["evaluator"])
    for key in ("target_file", "csv"):
        if key in ev:
            ev[key] = _resolve(base, ev[key])
    doc["evaluator"] = ev
    if "out_dir" in doc:
        doc["out_dir"] = _resolve(base, doc["out_dir"])
    for key, value in (overrides or {}).items():
        if value is not None:
            doc[key] = value
    return doc


def _check_paths(doc: dict) -> None:
    for key in ("grammar_file", "structure_file"):
        if not Path(doc[key]).is_file():
            raise UsageError(f"{key} not found: {doc[key]}")
    for key in ("target_file", "csv"):
        if key in doc["evaluator"] and not Path(doc["evaluator"][key]).is_file():
            raise UsageError(f"evaluator {key} not found: {doc['evaluator'][key]}")


def evolution_config(doc: dict) -> EvolutionConfig:
    try:
        return EvolutionConfig.from_dict({k: v for k, v in doc.items() if k in CONFIG_KEYS})
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid evolution settings: {exc}") from None


def build_evaluator(spec: dict):
    kind = spec.get("kind")
    if kind == "surrogate":
        allowed = {"kind", "target", "target_file"}
        if set(spec) - allowed:
            raise UsageError(f"unknown surrogate evaluator keys {sorted(set(spec) - allowed)}")
        text = Path(spec["target_file"]).read_text(encoding="utf-8") if "target_file" in spec else spec.get("target")
        if not text:
            raise UsageError("surrogate evaluator needs 'target' text or 'target_file'")
        return SurrogateEvaluator(parse_rendered(text))
    if kind == "dense":
        allowed = {"kind", "dataset", "csv", "seed"}
        if set(spec) - allowed:
            raise UsageError(f"unknown dense evaluator keys {sorted(set(spec) - allowed)}")
        if "csv" in spec:
            return DenseEvaluator(load_csv_dataset(spec["csv"], seed=spec.get("seed", 0)))
        ds = dict(spec.get("dataset", {}))
        try:
            return DenseEvaluator(
                make_toy_dataset(ds.pop("kind", "rings"), ds.pop("n", 1000), ds.pop("noise", 0.15), ds.pop("seed", 0))
            )
        except ValueError as exc:
            raise UsageError(f"invalid dataset settings: {exc}") from None
    raise UsageError(f"unknown evaluator kind {kind!r} (expected surrogate or dense)")


def _load_problem(doc: dict):
    try:
        g = load_grammar(doc["grammar_file"])
        s = load_structure(doc["structure_file"])
    except (GrammarError, StructureError) as exc:
        raise UsageError(f"{type(exc).__name__}: {exc}") from None
    problems = validate_structure(g, s)
    if problems:
        raise UsageError("; ".join(str(p) for p in problems))
    return g, s


def _write_best(run_dir: Path, result) -> None:
    (run_dir / "best_descriptor.txt").write_text(render(result.best_descriptor), encoding="utf-8")
    (run_dir / "best_descriptor.json").write_text(export_json(result.best_descriptor) + "\n", encoding="utf-8")


# --- commands ---------------------------------------------------------------


def cmd_run(args) -> int:
    config_path = Path(args.config)
    doc = load_run_config(
        config_path, {"master_seed": args.seed, "parallel_evaluations": args.jobs, "out_dir": args.out}
    )
    if "out_dir" not in doc:
        raise UsageError("no output directory: set 'out_dir' or pass --out")
    _check_paths(doc)
    cfg = evolution_config(doc)
    g, s = _load_problem(doc)
    evaluator = build_evaluator(doc["evaluator"])
    run_dir = Path(doc["out_dir"])
    if run_dir.exists() and any(run_dir.glob("gen_*.json")):
        raise UsageError(f"{run_dir} already holds a run; use 'resume' or choose another --out")
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    result = evolve(g, s, cfg, evaluator, run_dir=run_dir, stop_after=args.stop_after)
    if result.stats[-1].generation >= cfg.generations:
        _write_best(run_dir, result)
    print(run_dir)
    return 0


def cmd_resume(args) -> int:
    run_dir = Path(args.run_dir)
    config_file = run_dir / "config.json"
    if not config_file.is_file():
        raise UsageError(f"{run_dir} has no config.json")
    doc = json.loads(config_file.read_text(encoding="utf-8"))
    if args.jobs is not None:
        doc["parallel_evaluations"] = args.jobs
    cfg = evolution_config(doc)
    last = latest_checkpoint(run_dir)
    if last is None:
        raise UsageError(f"{run_dir} has no checkpoints")
    try:
        ckpt = checkpoint_load(last, cfg)
    except ConfigMismatch as exc:
        raise UsageError(str(exc)) from None
    if ckpt.state.generation >= cfg.generations and (run_dir / "best_descriptor.txt").exists():
        print(run_dir)
        return 0
    evaluator = build_evaluator(doc["evaluator"])
    result = evolve(ckpt.grammar, ckpt.structure, cfg, evaluator, run_dir=run_dir, resume=ckpt.state)
    _write_best(run_dir, result)
    print(run_dir)
    return 0


def cmd_sample(args) -> int:
    try:
        g = load_grammar(args.grammar)
        s = load_structure(args.structure)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    except (GrammarError, StructureError) as exc:
        raise UsageError(f"{type(exc).__name__}: {exc}") from None
    problems = validate_structure(g, s)
    if problems:
        raise UsageError("; ".join(str(p) for p in problems))
    blocks = []
    for i in range(args.count):
        ind = random_individual(g, s, streams.stream(args.seed, "sample", i))
        blocks.append(render(decode_individual(g, ind)))
    sys.stdout.write("\n".join(blocks))
    return 0


def _parse_shape(text: str) -> tuple[int, int, int]:
    try:
        dims = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise UsageError(f"--input-shape must be h,w,c integers, got {text!r}") from None
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise UsageError(f"--input-shape must be three positive integers, got {text!r}")
    return dims  # type: ignore[return-value]


def cmd_decode(args) -> int:
    shape = _parse_shape(args.input_shape)
    path = Path(args.checkpoint)
    if path.is_dir():
        path = latest_checkpoint(path) or path
    if not path.is_file():
        raise UsageError(f"checkpoint not found: {args.checkpoint}")
    ckpt = checkpoint_load(path)
    candidates = {ind.id: ind for ind in ckpt.state.population}
    candidates.setdefault(ckpt.state.best.id, ckpt.state.best)
    if args.id not in candidates:
        raise UsageError(f"UnknownId: no individual {args.id} in {path}")
    nd = decode_individual(ckpt.grammar, candidates[args.id])
    sys.stdout.write(render(nd))
    sys.stdout.write("--\n")
    sys.stdout.write("\n".join(check_shapes(nd, shape).lines()) + "\n")
    return 0


def cmd_stats(args) -> int:
    runs = []
    for d in args.run_dirs:
        path = Path(d) / "stats.csv" if Path(d).is_dir() else Path(d)
        if not path.is_file():
            raise UsageError(f"no stats.csv in {d}")
        runs.append(read_stats_csv(path))
    if args.until is not None:
        runs = [{k: v[r["generation"] <= args.until] for k, v in r.items()} for r in runs]
    if args.correlate:
        a, b = args.correlate
        for name in (a, b):
            if any(name not in r for r in runs):
                raise UsageError(f"MissingColumn: {name!r} (have {', '.join(STATS_HEADER)})")
        length = min(len(r[a]) for r in runs)
        xs = np.mean([r[a][:length] for r in runs], axis=0)
        ys = np.mean([r[b][:length] for r in runs], axis=0)
        print(repr(pearson(xs, ys)))
        return 0
    agg = aggregate_runs(runs)
    names = list(agg)
    print(",".join(names))
    for i in range(len(agg["generation"])):
        cells = [str(int(agg["generation"][i]))] + [repr(float(agg[n][i])) for n in names[1:]]
        print(",".join(cells))
    return 0


# --- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gramnas", description="Grammar-driven neuroevolution.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="start an evolutionary run from a JSON config")
    p.add_argument("config")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--jobs", type=int, help="concurrent fitness evaluations")
    p.add_argument("--out", help="run directory (overrides out_dir)")
    p.add_argument("--stop-after", type=int, metavar="GEN", help="stop after this generation; resume later")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("resume", help="continue a run from its latest checkpoint")
    p.add_argument("run_dir")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("sample", help="print random decoded individuals")
    p.add_argument("grammar")
    p.add_argument("structure")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("decode", help="render one individual from a checkpoint and check its shapes")
    p.add_argument("checkpoint", help="gen_<n>.json file or run directory")
    p.add_argument("id", type=int)
    p.add_argument("--input-shape", default="32,32,3", help="h,w,c (default 32,32,3)")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("stats", help="aggregate stats.csv files or correlate two columns")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--correlate", nargs=2, metavar=("FIELD_A", "FIELD_B"))
    p.add_argument("--until", type=int, metavar="GEN", help="only use generations <= GEN")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"gramnas: {exc}", file=sys.stderr)
        return 2
    except (GramnasError, OSError, ValueError) as exc:
        print(f"gramnas: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
