"""Command-line pipeline: gen, train, score, detect and xval.

Every command reads its inputs from files and writes one artifact (or a small
set of them). Settings resolve as command-line flags over a ``--config`` file
over built-in defaults; the environment is never consulted.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import failgen
from .detect import HampelConfig, evaluate, hampel_flag, merge_regions, read_labels, write_labels
from .ingest import DEFAULT_RULES, LogRecord, RecordError, load_rules, read_corpus, record_tokens, window
from .ngram import SplitPlan, crossval_entropy, load_model, save_model, train
from .timeline import export_timeline, read_timeline, score_timeline


class CLIError(Exception):
    """A failure reported to the user as a one-line message and exit status 1."""


@dataclass
class RunConfig:
    order: int = 5
    alpha: float = 1.0
    window_bytes: int = 4096
    hampel_half_width: int = 10
    hampel_k: float = 3.0
    one_sided: bool = True
    gap_bridge: int = 0
    folds: int = 10
    seed: int = 0
    workers: int = 1
    # keys that came from a flag or the config file rather than a default
    explicit: frozenset[str] = field(default_factory=frozenset, compare=False)

    def hampel(self) -> HampelConfig:
        return HampelConfig(self.hampel_half_width, self.hampel_k, one_sided=self.one_sided)

    def as_dict(self) -> dict:
        out = asdict(self)
        del out["explicit"]
        return out


_KEYS = {f.name: f.type for f in fields(RunConfig) if f.name != "explicit"}


def _coerce(key: str, value: object) -> object:
    kind = _KEYS[key]
    if kind == "bool":
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise CLIError(f"config: {key} must be a boolean, got {value!r}")
    try:
        if kind == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        return float(value)
    except (TypeError, ValueError):
        raise CLIError(f"config: {key} must be {'an integer' if kind == 'int' else 'a number'}, "
                       f"got {value!r}") from None


def read_config_file(path: str | Path) -> dict:
    """Parse a JSON object or ``key = value`` lines (``#`` starts a comment)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CLIError(f"cannot read config {path}: {exc.strerror}") from None
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CLIError(f"config {path}: {exc}") from None
    else:
        doc = {}
        for n, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CLIError(f"config {path} line {n}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            doc[key] = value
    out = {}
    for key, value in doc.items():
        name = key.replace("-", "_")
        if name not in _KEYS:
            raise CLIError(f"config {path}: unknown key {key!r}")
        out[name] = _coerce(name, value)
    return out


def resolve_config(flags: dict, config_path: str | None = None) -> RunConfig:
    """Flags override the file, which overrides the defaults."""
    values = read_config_file(config_path) if config_path else {}
    values.update({k: v for k, v in flags.items() if k in _KEYS})
    return RunConfig(**values, explicit=frozenset(values))


def _write(path: str | Path, data: bytes) -> None:
    """Write via a temporary file so a failed run never leaves a partial artifact."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _read_bytes(path: str | Path, what: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CLIError(f"cannot read {what} {path}: {exc.strerror}") from None


def _load_records(path: str, fmt: str) -> list[LogRecord]:
    data = _read_bytes(path, "corpus")
    if fmt == "auto":
        first = next((ln for ln in data.splitlines() if ln.strip()), b"")
        fmt = "structured" if first.lstrip().startswith(b"{") else "plain"
    records = []
    skipped = 0
    for item in read_corpus(data, fmt):
        if isinstance(item, RecordError):
            skipped += 1
        else:
            records.append(item)
    if skipped:
        print(f"warning: skipped {skipped} malformed lines in {path}", file=sys.stderr)
    return records


def _rules(path: str | None):
    return load_rules(path) if path else DEFAULT_RULES


# --------------------------------------------------------------------------
# commands


def _gen_corpus(doc: dict, cfg: RunConfig, want_baseline: bool) -> failgen.LabeledCorpus:
    doc = dict(doc)
    preset = doc.pop("preset", None)
    if "seed" in cfg.explicit:
        doc["seed"] = cfg.seed
    if preset is None:
        spec = failgen.ScenarioSpec.from_dict(doc)
        if want_baseline:
            spec = failgen.baseline(spec)
        return failgen.generate(spec)
    if preset == "openstack_shape":
        seed = doc.pop("seed", 7)
        if want_baseline:
            keep = {k: doc[k] for k in ("n_windows", "rare_share") if k in doc}
            return failgen.openstack_baseline(seed, target_bytes=cfg.window_bytes, **keep)
        try:
            return failgen.openstack_shape(seed, target_bytes=cfg.window_bytes, **doc)
        except TypeError as exc:
            raise failgen.SpecError("preset", str(exc)) from None
    if preset == "default":
        kind = doc.pop("kind", "compute-node")
        if kind not in failgen.KINDS:
            raise failgen.SpecError("kind", f"unknown failure kind {kind!r}")
        try:
            spec = failgen.default_scenario(doc.pop("seed", 0), kind, **doc)
        except TypeError as exc:
            raise failgen.SpecError("preset", str(exc)) from None
        spec.validate()
        return failgen.generate(failgen.baseline(spec) if want_baseline else spec)
    raise failgen.SpecError("preset", f"unknown preset {preset!r}")


def cmd_gen(args: argparse.Namespace, cfg: RunConfig) -> int:
    text = _read_bytes(args.spec, "spec")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CLIError(f"spec {args.spec}: {exc}") from None
    if not isinstance(doc, dict):
        raise CLIError(f"spec {args.spec}: expected a JSON object")
    try:
        corpus = _gen_corpus(doc, cfg, args.baseline)
    except failgen.SpecError as exc:
        raise CLIError(f"bad spec field {exc}") from None
    out = Path(args.out)
    windows = corpus.windows(cfg.window_bytes)
    _write(out / "corpus.jsonl", corpus.to_bytes())
    _write(out / "truth.json", corpus.truth_json())
    _write(out / "labels.csv", write_labels([any(r.anomalous for r in w.records) for w in windows]))
    print(f"records={len(corpus.records)} bytes={corpus.n_bytes} "
          f"regions={len(corpus.truth_regions)} windows={len(windows)} -> {out}")
    return 0


def cmd_train(args: argparse.Namespace, cfg: RunConfig) -> int:
    records = _load_records(args.corpus, args.format)
    rules = _rules(args.rules)
    model = train((record_tokens(r, rules) for r in records), cfg.order, cfg.alpha)
    if model.total_tokens == 0:
        print(f"warning: {args.corpus} has no tokens; the model is empty", file=sys.stderr)
    _write(args.out, save_model(model, compress=args.out.endswith(".gz")))
    print(f"vocab={len(model.vocab)} tokens={model.total_tokens} order={model.order} -> {args.out}")
    return 0


def cmd_score(args: argparse.Namespace, cfg: RunConfig) -> int:
    model = load_model(_read_bytes(args.model, "model"))
    if "alpha" in cfg.explicit:
        model.alpha = cfg.alpha
    records = _load_records(args.corpus, args.format)
    windows = window(records, cfg.window_bytes)
    tl = score_timeline(model, windows, _rules(args.rules), workers=cfg.workers,
                        model_id=str(args.model), corpus_id=str(args.corpus))
    _write(args.out, export_timeline(tl))
    vals = tl.values
    peak = f"{max(vals):.4f}" if vals else "n/a"
    print(f"windows={len(tl)} max_entropy={peak} -> {args.out}")
    return 0


def cmd_detect(args: argparse.Namespace, cfg: RunConfig) -> int:
    try:
        tl = read_timeline(_read_bytes(args.timeline, "timeline"))
    except ValueError as exc:
        raise CLIError(f"timeline {args.timeline}: {exc}") from None
    hcfg = cfg.hampel()
    flags = hampel_flag(tl, hcfg)
    report: dict = {
        "settings": {"hampel_half_width": hcfg.half_width, "hampel_k": hcfg.k,
                     "one_sided": hcfg.one_sided, "gap_bridge": cfg.gap_bridge},
        "n_windows": len(tl),
        "flagged": sorted(flags),
        "regions": [list(r) for r in merge_regions(flags, cfg.gap_bridge)],
    }
    summary = f"flagged={len(flags)} regions={len(report['regions'])}"
    if args.labels:
        try:
            labels = read_labels(_read_bytes(args.labels, "labels"))
        except ValueError as exc:
            raise CLIError(f"labels {args.labels}: {exc}") from None
        if len(labels) != len(tl):
            raise CLIError(f"labels cover {len(labels)} windows but the timeline has {len(tl)}")
        rep = evaluate(flags, labels, cfg.gap_bridge, n_windows=len(tl))
        metrics = rep.to_dict()
        for key in ("flagged", "regions"):
            metrics.pop(key)
        metrics["false_positive_rate"] = rep.false_positive_rate
        report["metrics"] = metrics
        summary += (f" precision={rep.precision:.4f} recall={rep.recall:.4f}"
                    f" f={rep.f_measure:.4f} ba={rep.balanced_accuracy:.4f}")
    _write(args.out, (json.dumps(report, indent=2) + "\n").encode())
    print(f"{summary} -> {args.out}")
    return 0


def parse_orders(text: str) -> list[int]:
    """``"1:8"`` (inclusive) or ``"2,3,5"``."""
    try:
        if ":" in text:
            lo, hi = (int(s) for s in text.split(":"))
            orders = list(range(lo, hi + 1))
        else:
            orders = [int(s) for s in text.split(",")]
    except ValueError:
        raise CLIError(f"bad order range {text!r}") from None
    if not orders or min(orders) < 1:
        raise CLIError(f"order range {text!r} must hold orders >= 1")
    return orders


def cmd_xval(args: argparse.Namespace, cfg: RunConfig) -> int:
    orders = parse_orders(args.orders)
    rules = _rules(args.rules)
    records = [t for t in (record_tokens(r, rules).tokens for r in _load_records(args.corpus, args.format)) if t]
    plan = SplitPlan(cfg.folds, seed=cfg.seed)
    if len(records) < plan.fold_count:
        raise CLIError(f"{len(records)} non-empty records cannot fill {plan.fold_count} folds")
    table = crossval_entropy(records, orders, plan, cfg.alpha)
    lines = ["order,mean,std"]
    for n in orders:
        vals = np.asarray(table[n])
        lines.append(f"{n},{vals.mean():.6f},{vals.std():.6f}")
    _write(args.out, ("\n".join(lines) + "\n").encode())
    print(f"orders={orders[0]}..{orders[-1]} folds={plan.fold_count} -> {args.out}")
    return 0


# --------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    S = argparse.SUPPRESS
    opts = {
        "order": lambda: p.add_argument("--order", type=int, default=S, help="n-gram order (default 5)"),
        "alpha": lambda: p.add_argument("--alpha", type=float, default=S,
                                        help="additive smoothing; 0 means unsmoothed (default 1)"),
        "window_bytes": lambda: p.add_argument("--window-bytes", type=int, default=S,
                                               help="bytes per window (default 4096)"),
        "seed": lambda: p.add_argument("--seed", type=int, default=S),
        "folds": lambda: p.add_argument("--folds", type=int, default=S, help="default 10"),
        "workers": lambda: p.add_argument("--workers", type=int, default=S,
                                          help="threads for scoring windows (default 1)"),
    }
    for name in names:
        opts[name]()
    p.add_argument("--config", help="key=value or JSON settings file")


def _add_format(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("auto", "plain", "structured"), default="auto",
                   help="corpus format; auto treats JSON lines as structured")
    p.add_argument("--rules", help="JSON file of mask rules replacing the defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logentropy", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a labeled synthetic corpus")
    p.add_argument("spec", help="scenario JSON, or {\"preset\": ...}")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.add_argument("--baseline", action="store_true", help="drop the failure (normal run only)")
    _add_common(p, "seed", "window_bytes")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train an n-gram model on a corpus")
    p.add_argument("corpus")
    p.add_argument("-o", "--out", required=True, help="model file (.gz compresses)")
    _add_format(p)
    _add_common(p, "order", "alpha")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a corpus into a per-window entropy timeline")
    p.add_argument("model")
    p.add_argument("corpus")
    p.add_argument("-o", "--out", required=True, help="timeline CSV")
    _add_format(p)
    _add_common(p, "alpha", "window_bytes", "workers")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("detect", help="flag outlying windows and optionally evaluate them")
    p.add_argument("timeline")
    p.add_argument("--labels", help="per-window labels CSV")
    p.add_argument("-o", "--out", required=True, help="report JSON")
    S = argparse.SUPPRESS
    p.add_argument("--hampel-half-width", type=int, default=S, help="neighbors per side (default 10)")
    p.add_argument("--hampel-k", type=float, default=S, help="threshold in scaled MADs (default 3)")
    side = p.add_mutually_exclusive_group()
    side.add_argument("--one-sided", dest="one_sided", action="store_true", default=S,
                      help="flag only entropy rises (default)")
    side.add_argument("--two-sided", dest="one_sided", action="store_false", default=S)
    p.add_argument("--gap-bridge", type=int, default=S,
                   help="merge flagged runs separated by at most this many windows (default 0)")
    _add_common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("xval", help="k-fold held-out entropy over a range of orders")
    p.add_argument("corpus")
    p.add_argument("--orders", default="1:8", help="inclusive range lo:hi or a comma list (default 1:8)")
    p.add_argument("-o", "--out", required=True, help="table CSV")
    _add_format(p)
    _add_common(p, "alpha", "folds", "seed")
    p.set_defaults(func=cmd_xval)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(vars(args), args.config)
        return args.func(args, cfg)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
