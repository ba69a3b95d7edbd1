"""Command-line entry point: ``gypsum build-graphs|train|summarize|evaluate|dedup|end-to-end``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import resolve
from .data import build_vocab, read_jsonl, write_jsonl
from .errors import ConfigError, DataError, GypsumError, MissingFile, StageError
from .frontend import SourceSnippet, Vocabulary, extend_ast, parse_source
from .graph import build_graph, read_graphs, serialize_graph

log = logging.getLogger("gypsum")


def _common(parser: argparse.ArgumentParser) -> None:
    # SUPPRESS keeps sub-command defaults from clobbering values given before the command
    s = argparse.SUPPRESS
    parser.add_argument("--config", default=s, help="flat key = value config file")
    parser.add_argument("--preset", default=s, choices=["desk", "paper"])
    parser.add_argument("--language", default=s, choices=["java", "python"])
    parser.add_argument("--seed", type=int, default=s)
    parser.add_argument("--set", action="append", default=s, metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    parser.add_argument("--dump-config", action="store_true", default=s,
                        help="print the resolved config and exit")
    parser.add_argument("-v", "--verbose", action="store_true", default=s)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gypsum", description=__doc__)
    p.add_argument("--version", action="version", version=f"gypsum {__version__}")
    _common(p)
    sub = p.add_subparsers(dest="command")

    c = sub.add_parser("build-graphs", help="parse snippets and write semantic graphs")
    _common(c)
    c.add_argument("--data", required=True)
    c.add_argument("--out", required=True)

    c = sub.add_parser("train", help="train a model")
    _common(c)
    c.add_argument("--data", required=True)
    c.add_argument("--valid")
    c.add_argument("--graphs", help="prebuilt graphs (JSON lines) keyed by snippet id")
    c.add_argument("--out", required=True)
    c.add_argument("--epochs", type=int)

    c = sub.add_parser("summarize", help="decode summaries with a trained checkpoint")
    _common(c)
    c.add_argument("--checkpoint", required=True)
    c.add_argument("--code", required=True, help="source file or JSON-lines dataset")
    c.add_argument("--beam", type=int)
    c.add_argument("--attrib", help="write leaf attribution JSON here")
    c.add_argument("--out", help="JSON-lines output (default stdout)")

    c = sub.add_parser("evaluate", help="score hypotheses against references")
    _common(c)
    c.add_argument("--hyps", required=True)
    c.add_argument("--refs", required=True)
    c.add_argument("--out")

    c = sub.add_parser("dedup", help="remove test snippets duplicated in the training split")
    _common(c)
    c.add_argument("--train", required=True)
    c.add_argument("--test", required=True)
    c.add_argument("--out-clean", required=True)
    c.add_argument("--out-hist", required=True)
    c.add_argument("--out-records")
    c.add_argument("--unit", choices=["token", "char"], default="token")

    c = sub.add_parser("end-to-end", help="build graphs, train, summarize and evaluate")
    _common(c)
    c.add_argument("--data", help="training set (JSON lines)")
    c.add_argument("--valid")
    c.add_argument("--test", help="test set (defaults to the training set)")
    c.add_argument("--out", required=True)
    c.add_argument("--checkpoint", help="skip training and use this checkpoint")
    c.add_argument("--summarize-only", action="store_true")
    c.add_argument("--epochs", type=int)
    c.add_argument("--beam", type=int)
    c.add_argument("--report", help="report path (default <out>/report.json)")
    return p


def config_from(args):
    overrides = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v
    for key in ("preset", "language", "seed"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    if getattr(args, "epochs", None) is not None:
        overrides["epochs"] = args.epochs
    return resolve(getattr(args, "config", None), overrides)


def _emit(obj, path=None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------- commands

def build_graphs(data, out, cfg) -> dict:
    snippets = read_jsonl(data, cfg.language)
    tokenizer = Vocabulary([])
    built, skipped = 0, []
    with open(out, "wb") as fh:
        for s in snippets:
            try:
                ast = extend_ast(parse_source(s), tokenizer, s.language)
                if len(ast) > cfg.max_nodes:
                    raise DataError(f"{len(ast)} nodes exceeds cap {cfg.max_nodes}")
                fh.write(serialize_graph(build_graph(ast, s.id, cfg.patterns)) + b"\n")
                built += 1
            except (GypsumError, RecursionError) as exc:
                skipped.append({"id": s.id, "reason": str(exc)})
    stats = {"built": built, "skipped": len(skipped), "skips": skipped}
    if built == 0:
        raise DataError(f"no graph could be built from {data}")
    return stats


def run_train(cfg, data, out, valid=None, graphs=None) -> dict:
    from .training import train
    snippets = read_jsonl(data, cfg.language)
    if not snippets:
        raise DataError(f"training set {data} is empty")
    valid_snippets = read_jsonl(valid, cfg.language) if valid else None
    vocab = build_vocab(snippets, cfg)
    graph_map = {g.id: g for g in read_graphs(graphs)} if graphs else None
    last = None
    for ckpt in train(snippets, cfg, vocab, valid_snippets, out_dir=out, graphs=graph_map,
                      track_train_loss=not valid_snippets):
        last = ckpt
    last.save(out)
    (Path(out) / "config.txt").write_text(cfg.dump())
    return {"checkpoint": str(Path(out) / "checkpoint.pt"), "epochs": last.epoch,
            "best_score": last.metrics.get("best_score"), "skipped": last.metrics.get("skipped", 0),
            "vocab_size": len(vocab)}


def _load_code(path, cfg) -> list[SourceSnippet]:
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"code input not found: {path}")
    if path.suffix == ".jsonl":
        return read_jsonl(path, cfg.language)
    language = "python" if path.suffix == ".py" else cfg.language
    return [SourceSnippet(path.read_text(encoding="utf-8"), language, None, path.stem)]


def run_summarize(checkpoint, code, beam=None, attrib=None, out=None) -> list[dict]:
    from .inference import Summarizer
    from .training import Checkpoint
    ckpt = Checkpoint.load(checkpoint)
    summ = Summarizer(ckpt)
    results = []
    for s in _load_code(code, ckpt.cfg):
        try:
            hyps = summ.beam_search(s, beam or ckpt.cfg.beam_size)
            results.append({"id": s.id, "summary": hyps[0].text if hyps else "",
                            "logprob": hyps[0].logprob if hyps else None})
        except (GypsumError, RecursionError) as exc:
            results.append({"id": s.id, "summary": "", "error": str(exc)})
    if attrib:
        rows = []
        for s, r in zip(_load_code(code, ckpt.cfg), results):
            if r["summary"]:
                m = summ.attribution(s, r["summary"])
                rows.append({"id": s.id, **json.loads(m.to_json())})
        Path(attrib).write_text(json.dumps(rows[0] if len(rows) == 1 else rows))
    lines = "".join(json.dumps(r) + "\n" for r in results)
    if out:
        Path(out).write_text(lines)
    else:
        sys.stdout.write(lines)
    return results


def _read_summaries(path) -> list[str]:
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"file not found: {path}")
    text = path.read_text(encoding="utf-8").splitlines()
    if path.suffix == ".jsonl":
        return [json.loads(line).get("summary") or "" for line in text if line.strip()]
    return text


def run_evaluate(hyps, refs, out=None) -> dict:
    from .metrics import evaluate_corpus
    report = evaluate_corpus(_read_summaries(hyps), _read_summaries(refs)).to_dict()
    if out:
        _emit(report, out)
    return report


def run_dedup(train, test, out_clean, out_hist, unit="token", out_records=None, cfg=None) -> dict:
    from .datatool import dedup_split
    lang = cfg.language if cfg else None
    tr, te = read_jsonl(train, lang), read_jsonl(test, lang)
    cleaned, records, hist = dedup_split(tr, te, unit)
    write_jsonl(out_clean, cleaned)
    hist.write_csv(out_hist)
    if out_records:
        with open(out_records, "w") as fh:
            for r in records:
                fh.write(json.dumps({"test_id": r.test_id, "train_id": r.train_id,
                                     "score": r.score}) + "\n")
    return {"test": len(te), "kept": len(cleaned), "removed": len(te) - len(cleaned),
            "removed_fraction": (len(te) - len(cleaned)) / len(te) if te else 0.0}


def _stage(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except StageError:
        raise
    except (GypsumError, OSError, ValueError, RecursionError) as exc:
        raise StageError(name, exc) from exc


def end_to_end(cfg, args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {"config": cfg.to_dict(), "stages": {}}
    ckpt_dir = args.checkpoint
    test = args.test or args.data
    if args.summarize_only or args.checkpoint:
        if not ckpt_dir or not Path(ckpt_dir).exists():
            raise StageError("inference", MissingFile(f"checkpoint not found: {ckpt_dir}"))
    else:
        if not args.data:
            raise StageError("build-graphs", DataError("--data is required unless --summarize-only"))
        graphs = out / "graphs.jsonl"
        report["stages"]["build-graphs"] = _stage("build-graphs", build_graphs, args.data, graphs, cfg)
        ckpt_dir = out / "model"
        report["stages"]["train"] = _stage("train", run_train, cfg, args.data, ckpt_dir, args.valid,
                                           graphs)
    if not test:
        raise StageError("inference", DataError("no test data given"))
    hyps = out / "hyps.jsonl"
    _stage("inference", run_summarize, ckpt_dir, test, args.beam, None, hyps)
    report["stages"]["inference"] = {"hypotheses": str(hyps)}
    metrics = _stage("evaluate", run_evaluate, hyps, test)
    report["metrics"] = {k: metrics[k] for k in ("bleu", "meteor", "rouge_l", "count")}
    report["ok"] = True
    return report


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from(args)
    except GypsumError as exc:
        _emit({"ok": False, "stage": "config", "error": str(exc)})
        return 2
    if getattr(args, "dump_config", False):
        sys.stdout.write(cfg.dump())
        return 0
    if not args.command:
        parser.print_help()
        return 2
    try:
        if args.command == "build-graphs":
            _emit({"ok": True, **build_graphs(args.data, args.out, cfg)})
        elif args.command == "train":
            _emit({"ok": True, **run_train(cfg, args.data, args.out, args.valid, args.graphs)})
        elif args.command == "summarize":
            run_summarize(args.checkpoint, args.code, args.beam, args.attrib, args.out)
        elif args.command == "evaluate":
            _emit({"ok": True, **run_evaluate(args.hyps, args.refs, args.out)})
        elif args.command == "dedup":
            _emit({"ok": True, **run_dedup(args.train, args.test, args.out_clean, args.out_hist,
                                           args.unit, args.out_records, cfg)})
        elif args.command == "end-to-end":
            report = end_to_end(cfg, args)
            _emit(report, args.report or Path(args.out) / "report.json")
            _emit(report)
        return 0
    except StageError as exc:
        failure = {"ok": False, "stage": exc.stage, "error": str(exc.cause)}
        if args.command == "end-to-end":
            Path(args.out).mkdir(parents=True, exist_ok=True)
            _emit(failure, args.report or Path(args.out) / "report.json")
        _emit(failure)
        return 1
    except (GypsumError, OSError) as exc:
        _emit({"ok": False, "stage": args.command, "error": str(exc)})
        return 1


if __name__ == "__main__":
    sys.exit(main())
