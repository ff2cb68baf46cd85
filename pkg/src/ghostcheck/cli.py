"""Command-line front end: simulate, attack, check, eval, bench.

Exit status: 0 on success, 2 for configuration errors, 3 for data errors
(unreadable or malformed inputs). Failures also print one JSON error record
on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import CONFIG_ENV_VAR, RunConfig, load_config
from .errors import ConfigError, DataError
from .framelog import dumps_log, dumps_verdicts, read_log, read_verdicts
from .metrics import AttackBookkeeping, attack_eval, benchmark, match_ratio_from_verdicts
from .pipeline import Pipeline
from .simulator import generate_scenes, inject_attack

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def _emit(text: str, output: str | None):
    if output:
        Path(output).parent.mkdir(parents=True, exist_ok=True)
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _read_log(path: str):
    try:
        return read_log(path)
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc


def cmd_simulate(args, cfg: RunConfig) -> int:
    configs = cfg.simulation.scene_configs(args.seed)
    log = generate_scenes(configs, jobs=args.jobs)
    _emit(dumps_log(log), args.output or cfg.output["log"])
    return EXIT_OK


def cmd_attack(args, cfg: RunConfig) -> int:
    log = _read_log(args.log)
    seed = cfg.attack_seed if args.seed is None else args.seed
    attacked = inject_attack(log, cfg.attack, seed=seed, p_asr=cfg.p_asr)
    _emit(dumps_log(attacked), args.output or cfg.output["log"])
    return EXIT_OK


def cmd_check(args, cfg: RunConfig) -> int:
    log = _read_log(args.log)
    verdicts = Pipeline(cfg.pipeline).run(log, jobs=args.jobs)
    _emit(dumps_verdicts(verdicts), args.output or cfg.output["verdicts"])
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    try:
        verdicts = read_verdicts(args.verdicts)
    except OSError as exc:
        raise DataError(f"{args.verdicts}: {exc.strerror}") from exc
    book = AttackBookkeeping.from_log(_read_log(args.log))
    wildcard = cfg.pipeline.cmcs.others_is_wildcard
    reports = {
        "match_ratio": match_ratio_from_verdicts(verdicts, book, wildcard),
        "attack_eval": attack_eval(verdicts, book),
    }
    out_dir = args.output or cfg.output["reports"]
    if out_dir is None:
        if args.format == "csv":
            sys.stdout.write("".join(f"# {name}\n{r.to_csv()}" for name, r in reports.items()))
        else:
            sys.stdout.write(_json({name: r.to_record() for name, r in reports.items()}))
        return EXIT_OK
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    for name, report in reports.items():
        if args.format == "csv":
            (Path(out_dir) / f"{name}.csv").write_text(report.to_csv(), encoding="utf-8")
        else:
            (Path(out_dir) / f"{name}.json").write_text(_json(report.to_record()), encoding="utf-8")
    return EXIT_OK


def cmd_bench(args, cfg: RunConfig) -> int:
    log = _read_log(args.log)
    reps = args.repetitions or cfg.bench_repetitions
    if reps < 10:
        raise ConfigError("--repetitions must be >= 10")
    report = benchmark(Pipeline(cfg.pipeline), log, repetitions=reps, warmup=cfg.bench_warmup)
    text = report.to_csv() if args.format == "csv" else _json(report.to_record())
    _emit(text, args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"YAML/JSON run config (default: ${CONFIG_ENV_VAR})")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--jobs", type=int, default=1, help="scene-level worker processes")
    common.add_argument("--output", help="output file (directory for eval); stdout if omitted")
    common.add_argument("--format", choices=("records", "csv"), default="records")

    parser = argparse.ArgumentParser(prog="ghostcheck", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate synthetic scenes")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("attack", parents=[common], help="inject ghost objects into a log")
    p.add_argument("log")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("check", parents=[common], help="run the consistency check on a log")
    p.add_argument("log")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("eval", parents=[common], help="match-ratio and attack metrics")
    p.add_argument("verdicts")
    p.add_argument("log")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", parents=[common], help="per-stage runtime of the check")
    p.add_argument("log")
    p.add_argument("--repetitions", type=int, default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def _fail(kind: str, exc: Exception, code: int) -> int:
    record = {"error": kind, "message": str(exc)}
    if getattr(exc, "line", None) is not None:
        record["line"] = exc.line
    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except DataError as exc:
        return _fail("data", exc, EXIT_DATA)


if __name__ == "__main__":
    sys.exit(main())
