"""Command line interface: generate, build datasets, detect, query, score.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O or data-format
error, 3 every LLM query in the run came back defaulted.

Settings resolve as flags > ANOMALAB_* environment variables > --config
key=value file > built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import datasets as ds
from .anomalies import CATEGORIES, category_of
from .detectors import DETECTOR_KINDS, DetectorConfig, run_detector
from .generator import MIN_LENGTH, derive_seed
from .llm import ConfigError, LlmClient, LlmConfig, MockLlmServer
from .metrics import score_segments
from .prompts import (
    SHOT_RANGES,
    STRATEGIES,
    prompt_for_series,
    select_shot_examples,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_DEFAULTED = 3

_ENV_PREFIX = "ANOMALAB_"


class UsageError(Exception):
    """Post-parse validation failure; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors by default; this tool reserves
    # 2 for I/O problems
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_config_file(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            if "=" not in s:
                raise UsageError(f"{path}: line {lineno}: expected key=value")
            key, value = s.split("=", 1)
            out[key.strip()] = value.strip()
    return out


class Settings:
    """Layered option lookup over parsed args, environment, config file."""

    def __init__(self, args):
        self.args = args
        path = getattr(args, "config", None)
        self.file = _load_config_file(path) if path else {}

    def get(self, name, default=None, cast=None):
        value = getattr(self.args, name, None)
        if value is None:
            env = os.environ.get(_ENV_PREFIX + name.upper())
            if env is not None:
                value = env
            elif name in self.file:
                value = self.file[name]
            else:
                return default
        if cast is not None and isinstance(value, str):
            try:
                value = cast(value)
            except ValueError:
                raise UsageError(f"invalid value for {name}: {value!r}") from None
        return value


def _window_arg(value) -> int | None:
    if value is None or value == "auto":
        return None
    try:
        return int(value)
    except (TypeError, ValueError):
        raise UsageError(f"window must be an integer or 'auto', got {value!r}") from None


def _build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="FILE",
                        help="key=value settings file (lowest precedence)")

    parser = _Parser(prog="anomalab",
                     description="Synthetic anomaly benchmark toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common],
                       help="emit one labeled sample with explanations")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--type", choices=(*CATEGORIES, "none"),
                   help="force one anomaly category, or 'none' for a clean series")
    p.add_argument("--out", metavar="FILE", help="default: stdout")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("build-eval", parents=[common],
                       help="build the three evaluation files plus manifest")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", metavar="DIR", required=True)
    p.set_defaults(func=cmd_build_eval)

    p = sub.add_parser("build-instructions", parents=[common],
                       help="build an instruction-tuning JSONL")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", metavar="FILE", required=True)
    p.add_argument("--allow-no-anomaly", action=argparse.BooleanOptionalAction,
                   default=True)
    p.set_defaults(func=cmd_build_instructions)

    p = sub.add_parser("detect", parents=[common],
                       help="run a classic detector over a dataset")
    p.add_argument("--input", metavar="FILE", required=True)
    p.add_argument("--out", metavar="FILE", required=True)
    p.add_argument("--detector", choices=DETECTOR_KINDS, required=True)
    p.add_argument("--window", default=None,
                   help="subsequence/context window, or 'auto' (default)")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--quantile", type=float, default=None)
    p.add_argument("--train-fraction", type=float, default=None)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("query-llm", parents=[common],
                       help="query a chat endpoint over a dataset")
    p.add_argument("--input", metavar="FILE", required=True)
    p.add_argument("--out", metavar="FILE", required=True)
    p.add_argument("--strategy", choices=STRATEGIES, default=None)
    p.add_argument("--mode", choices=("trial", "json"), default=None)
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--seed", type=int, default=None,
                   help="required when shots are sampled")
    p.add_argument("--endpoint", default=None,
                   help="chat-completions URL, or 'mock' for the bundled server")
    p.add_argument("--model", default=None)
    p.add_argument("--api-key-env", dest="api_key_env", default=None)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--max-retries", dest="max_retries", type=int, default=None)
    p.add_argument("--timeout", type=float, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--precision", type=int, default=None)
    p.set_defaults(func=cmd_query_llm)

    p = sub.add_parser("score", parents=[common],
                       help="score a predictions file against its dataset")
    p.add_argument("--pred", metavar="FILE", required=True)
    p.add_argument("--dataset", metavar="FILE", required=True)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--out-json", dest="out_json", metavar="FILE")
    p.add_argument("--out-csv", dest="out_csv", metavar="FILE")
    p.set_defaults(func=cmd_score)

    return parser


def _emit(payload: dict, out_path):
    text = json.dumps(payload, indent=2) + "\n"
    if out_path:
        ds.write_atomic(out_path, text)
    else:
        sys.stdout.write(text)


def cmd_generate(args) -> int:
    if args.length < MIN_LENGTH:
        raise UsageError(f"--length must be at least {MIN_LENGTH}")
    category = None if args.type in (None, "none") else args.type
    labeled, bundle = ds.build_labeled_sample(
        args.length, args.seed, category=category,
        anomalies=args.type != "none",
    )
    _emit(ds.sample_record(labeled, bundle, args.seed), args.out)
    return EXIT_OK


def cmd_build_eval(args) -> int:
    manifest = ds.build_eval_dataset(args.seed, args.out)
    print(f"wrote {manifest.sample_count} samples to {args.out}")
    return EXIT_OK


def cmd_build_instructions(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    manifest = ds.build_instruction_dataset(
        args.n, args.seed, args.out, allow_no_anomaly=args.allow_no_anomaly,
    )
    print(f"wrote {manifest.sample_count} samples to {args.out}")
    return EXIT_OK


def _dataset_values(row: dict, path, index: int) -> list:
    if "values" not in row:
        raise ds.DatasetFormatError(f"{path}: row {index}: missing 'values'")
    return row["values"]


def cmd_detect(args) -> int:
    settings = Settings(args)
    config = DetectorConfig(
        kind=args.detector,
        window=_window_arg(settings.get("window", "auto")),
        threshold=settings.get("threshold", 3.0, cast=float),
        train_fraction=settings.get("train_fraction", 0.5, cast=float),
        discord_quantile=settings.get("quantile", 0.99, cast=float),
    )
    rows = ds.load_jsonl(args.input)
    out_rows = []
    for i, row in enumerate(rows):
        values = _dataset_values(row, args.input, i)
        pred = run_detector(values, config)
        out_rows.append({"index": i, "pred": pred, "length": len(values)})
    ds.save_jsonl(args.out, out_rows)
    print(f"wrote {len(out_rows)} predictions to {args.out}")
    return EXIT_OK


def _row_category(row: dict) -> str | None:
    for t in row.get("types", ()):
        if t != "none":
            return category_of(t)
    return None


def cmd_query_llm(args) -> int:
    settings = Settings(args)
    strategy = settings.get("strategy", "direct")
    if strategy not in STRATEGIES:
        raise UsageError(f"unknown strategy {strategy!r}")
    mode = settings.get("mode", "json")
    if mode not in ("trial", "json"):
        raise UsageError(f"unknown requirements mode {mode!r}")
    lo, hi = SHOT_RANGES[strategy]
    shots = settings.get("shots", lo, cast=int)
    if not lo <= shots <= hi:
        raise UsageError(f"strategy {strategy!r} takes {lo}-{hi} shots, got {shots}")
    if shots > 0 and args.seed is None:
        raise UsageError("--seed is required when shot examples are sampled")
    precision = settings.get("precision", 4, cast=int)
    jobs = settings.get("jobs", 4, cast=int)
    if jobs < 1:
        raise UsageError("--jobs must be at least 1")

    rows = ds.load_jsonl(args.input)
    endpoint = settings.get("endpoint")
    if not endpoint:
        raise UsageError("an endpoint is required ('mock' for the bundled server)")
    mock = None
    if endpoint == "mock":
        mock = MockLlmServer().__enter__()
        endpoint = mock.url
    try:
        config = LlmConfig(
            endpoint=endpoint,
            model=settings.get("model", "gpt-4o-mini"),
            api_key_env=(None if mock is not None
                         else settings.get("api_key_env", "ANOMALAB_API_KEY")),
            temperature=settings.get("temperature", None, cast=float),
            max_retries=settings.get("max_retries", 5, cast=int),
            timeout=settings.get("timeout", 30.0, cast=float),
            max_concurrent=jobs,
        )
        client = LlmClient(config)

        def work(item):
            i, row = item
            values = _dataset_values(row, args.input, i)
            shot_list = []
            if shots > 0:
                rng = np.random.default_rng(derive_seed(args.seed, "shots", i))
                shot_list = select_shot_examples(_row_category(row), shots, rng)
            bundle = prompt_for_series(values, strategy=strategy, mode=mode,
                                       shots=shot_list, precision=precision)
            res = client.query(bundle.body)
            return {
                "index": i,
                "pred": list(res.indices),
                "reason": res.reason,
                "attempts": res.attempts,
                "defaulted": res.defaulted,
                "length": len(values),
                "raw": res.raw,
            }

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            out_rows = list(pool.map(work, enumerate(rows)))
    finally:
        if mock is not None:
            mock.__exit__(None, None, None)

    ds.save_jsonl(args.out, out_rows)
    defaulted = sum(1 for r in out_rows if r["defaulted"])
    print(f"wrote {len(out_rows)} responses to {args.out} "
          f"({defaulted} defaulted)")
    if out_rows and defaulted == len(out_rows):
        return EXIT_DEFAULTED
    return EXIT_OK


def cmd_score(args) -> int:
    if args.window < 0:
        raise UsageError("--window must be non-negative")
    preds = ds.load_jsonl(args.pred)
    data = ds.load_jsonl(args.dataset)
    items = []
    for row in preds:
        if "index" not in row or "pred" not in row:
            raise ds.DatasetFormatError(
                f"{args.pred}: rows need 'index' and 'pred' fields")
        i = row["index"]
        if not 0 <= i < len(data):
            raise ds.DatasetFormatError(
                f"{args.pred}: index {i} outside dataset of {len(data)} rows")
        labels = data[i].get("labels")
        if labels is None:
            raise ds.DatasetFormatError(
                f"{args.dataset}: row {i}: missing 'labels'")
        truth = [t for t, lab in enumerate(labels) if lab == 1]
        items.append((row["pred"], truth, len(labels)))
    if not items:
        raise ds.DatasetFormatError(f"{args.pred}: no predictions to score")
    report = score_segments(items, window=args.window)
    payload = report.to_dict()
    if args.out_json:
        ds.write_atomic(args.out_json, json.dumps(payload, indent=2) + "\n")
    if args.out_csv:
        buf = io.StringIO()
        csv.writer(buf).writerows(report.to_csv_rows())
        ds.write_atomic(args.out_csv, buf.getvalue())
    if not args.out_json:
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    else:
        agg = payload["aggregates"]
        print(f"scored {len(items)} segments: "
              f"point_f={agg['point_f']['mean']:.4f} "
              f"range_f={agg['range_f']['mean']:.4f}")
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("ANOMALAB_LOG", "WARNING"))
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ds.DatasetFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
