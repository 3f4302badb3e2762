"""Command-line entry point wiring all modules together.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .audio import AudioIOError, read_wav, synth_test_signal, write_wav
from .codec import (
    ToolCallError,
    chain_to_jsonable,
    emit_toolcalls,
    load_chain,
    parse_toolcalls,
    save_chain,
)
from .corpus import SamplingConfig, build_corpus, load_manifest, sample_chain
from .dsp import RenderError, render_chain
from .gateway import (
    EndpointConfig,
    GatewayError,
    baseline_predict,
    estimation_fields,
    query_estimator,
    render_prompt,
    replay_estimator,
)
from .metrics import MetricError, evaluate_pair, ntl_was, order_spearman
from .registry import (
    FxCall,
    FxChain,
    RegistryError,
    normalize_param,
    quantize_param,
    registry_default,
    registry_from_jsonable,
)

# Default RNG seed for every subcommand, kept fixed for reproducibility.
DEFAULT_SEED = 1729

_DOMAIN_ERRORS = (
    AudioIOError, ToolCallError, RenderError, RegistryError, MetricError,
    GatewayError, ValueError, OSError,
)

log = logging.getLogger("fxchain")


def _parse_lengths(text: str) -> tuple[int, ...]:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(part) for part in text.split(","))


def _load_registry(args):
    if args.registry:
        with open(args.registry) as handle:
            return registry_from_jsonable(json.load(handle))
    return registry_default()


def cmd_render(args) -> int:
    registry = _load_registry(args)
    chain = load_chain(args.chain_file)
    buffer = read_wav(args.in_wav)
    output, trace = render_chain(chain, buffer, registry)
    write_wav(args.out_wav, output, fmt="float32")
    print(f"{'tool':<22} {'peak in':>9} {'rms in':>9} {'peak out':>9} {'rms out':>9} {'ms':>8}")
    for entry in trace.entries:
        print(f"{entry.tool:<22} {entry.peak_in:9.4f} {entry.rms_in:9.4f} "
              f"{entry.peak_out:9.4f} {entry.rms_out:9.4f} {entry.wall_s * 1000:8.2f}")
    print(f"wrote {args.out_wav} ({output.duration_s:.2f} s at {output.sample_rate} Hz)")
    return 0


def cmd_sample(args) -> int:
    registry = _load_registry(args)
    rng = np.random.default_rng(args.seed)
    if args.baseline:
        chain = baseline_predict(args.baseline, rng, registry, args.regime)
    else:
        chain = sample_chain(rng, args.length, args.regime, registry)
    if args.format == "json":
        print(json.dumps(chain_to_jsonable(chain), indent=2))
    else:
        print(emit_toolcalls(chain, registry))
    return 0


def cmd_parse(args) -> int:
    registry = _load_registry(args)
    text = Path(args.file).read_text() if args.file else sys.stdin.read()
    document = parse_toolcalls(text, registry, policy=args.policy)
    print(json.dumps({
        "calls": chain_to_jsonable(document.chain)["calls"],
        "cot": document.cot,
        "trailing_response": document.trailing_response.strip(),
        "issues": [
            {"severity": i.severity, "message": i.message}
            for i in document.report.issues
        ],
    }, indent=2))
    return 0


def cmd_corpus_build(args) -> int:
    registry = _load_registry(args)
    sources_dir = Path(args.sources)
    sources = sorted(sources_dir.glob("*.wav"))
    if not sources:
        print(f"error: no WAV files under {sources_dir}", file=sys.stderr)
        return 1
    config = SamplingConfig(
        seed=args.seed if args.build_seed is None else args.build_seed,
        regime=args.regime,
        lengths=_parse_lengths(args.lengths),
        pairs_per_length=args.per_length,
        target_rms_dbfs=args.target_rms,
    )
    jobs = args.jobs or os.cpu_count() or 1
    manifest = build_corpus(config, sources, args.out, registry, jobs=jobs)
    print(f"built {len(manifest.records)} records under {args.out}")
    return 0


def cmd_make_signals(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for kind in ("sine", "sweep", "pink_noise"):
        buffer = synth_test_signal(kind, args.duration, args.rate)
        write_wav(out / f"{kind}.wav", buffer, fmt="float32")
        print(f"wrote {out / (kind + '.wav')}")
    return 0


def _load_embeddings(path):
    if not path:
        return {}
    with open(path) as handle:
        doc = json.load(handle)
    table = {}
    for record_id, encoders in doc.items():
        table[record_id] = {
            name: (pair["ref"], pair["est"]) for name, pair in encoders.items()
        }
    return table


def _evaluate_one(record, pred_dir, registry, embeddings):
    pred_path = Path(pred_dir) / f"{record.record_id}.json"
    if not pred_path.is_file():
        return record.record_id, None, f"missing prediction file {pred_path.name}"
    try:
        chain = load_chain(pred_path)
        report = evaluate_pair(chain, record, registry,
                               embeddings.get(record.record_id))
        return record.record_id, report, None
    except _DOMAIN_ERRORS as exc:
        return record.record_id, None, str(exc)


def cmd_eval_run(args) -> int:
    registry = _load_registry(args)
    manifest = load_manifest(args.manifest)
    embeddings = _load_embeddings(args.embeddings)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs = args.jobs or os.cpu_count() or 1

    def worker(record):
        return _evaluate_one(record, args.pred_dir, registry, embeddings)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(worker, manifest.records))
    else:
        results = [worker(record) for record in manifest.records]

    fields = ("effect_accuracy", "order_correlation", "param_mae",
              "mrs_lr", "mrs_ms", "af_distance")
    cosine_names = sorted({
        name for _, report, _ in results if report is not None
        for name in report.cosine_sims
    })
    rows = []
    sums = {name: [] for name in fields}
    sums.update({f"cosine_{name}": [] for name in cosine_names})
    failed = 0
    undefined_correlation = 0
    absent_mae = 0
    for record_id, report, error in results:
        if report is None:
            failed += 1
            rows.append({"id": record_id, "status": "failed", "error": error})
            continue
        row = {"id": record_id, "status": "ok", "error": ""}
        for name in fields:
            value = getattr(report, name)
            row[name] = "" if value is None else f"{value:.9g}"
            if value is not None:
                sums[name].append(value)
        for name in cosine_names:
            value = report.cosine_sims.get(name)
            row[f"cosine_{name}"] = "" if value is None else f"{value:.9g}"
            if value is not None:
                sums[f"cosine_{name}"].append(value)
        undefined_correlation += report.order_correlation is None
        absent_mae += report.param_mae is None
        rows.append(row)

    csv_path = out_dir / "records.csv"
    cosine_columns = [f"cosine_{name}" for name in cosine_names]
    with open(csv_path, "w", newline="") as handle:
        writer = csv.DictWriter(handle,
                                fieldnames=["id", "status", *fields, *cosine_columns, "error"])
        writer.writeheader()
        writer.writerows(rows)

    aggregate = {
        "records": len(manifest.records),
        "failed": failed,
        "undefined_correlation": undefined_correlation,
        "absent_param_mae": absent_mae,
        "means": {
            name: (float(np.mean(values)) if values else None)
            for name, values in sums.items()
        },
    }
    agg_path = out_dir / "aggregate.json"
    agg_path.write_text(json.dumps(aggregate, indent=2) + "\n")
    print(f"wrote {csv_path} and {agg_path}")
    for name, value in aggregate["means"].items():
        print(f"  mean {name}: {'n/a' if value is None else f'{value:.4f}'}")
    if failed:
        print(f"{failed} record(s) failed", file=sys.stderr)

    if args.plot:
        _emit_plots(manifest, args.pred_dir, registry, out_dir / "plots")
    return 1 if failed else 0


def _emit_plots(manifest, pred_dir, registry, plot_dir) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plot_dir = Path(plot_dir)
    plot_dir.mkdir(parents=True, exist_ok=True)
    for record in manifest.records:
        pred_path = Path(pred_dir) / f"{record.record_id}.json"
        if not pred_path.is_file():
            continue
        dry = read_wav(record.dry_path)
        ref = read_wav(record.ref_path)
        pred, _ = render_chain(load_chain(pred_path), dry, registry)
        fig, axes = plt.subplots(1, 3, figsize=(12, 3.2), sharey=True)
        for ax, (title, buf) in zip(axes, [("dry", dry), ("ref", ref), ("pred", pred)]):
            ax.specgram(buf.data[0], Fs=buf.sample_rate, NFFT=1024, noverlap=512)
            ax.set_title(title)
        fig.suptitle(record.record_id)
        fig.tight_layout()
        fig.savefig(plot_dir / f"{record.record_id}.png", dpi=100)
        plt.close(fig)


def cmd_gateway_estimate(args) -> int:
    registry = _load_registry(args)
    manifest = load_manifest(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = EndpointConfig(
        base_url=args.endpoint,
        model_name=args.model,
        api_key_env_var=args.api_key_env,
        timeout_s=args.timeout,
        max_retries=args.retries,
    )
    failures = 0
    for record in manifest.records:
        dry = read_wav(record.dry_path)
        ref = read_wav(record.ref_path)
        tags = record.source_tags or ("unknown",)
        fields = estimation_fields(dry, ref, registry, instrument=tags[0])
        bundle = render_prompt("instruction_following", fields, registry)
        try:
            if args.replay:
                text = replay_estimator(config, bundle, args.replay)
            else:
                text = query_estimator(config, bundle, transcript_path=args.transcript)
        except GatewayError as exc:
            log.error("record %s: %s", record.record_id, exc)
            failures += 1
            continue
        document = parse_toolcalls(text, registry, policy="clamp")
        save_chain(out_dir / f"{record.record_id}.json", document.chain)
        for issue in document.report.issues:
            log.info("record %s: %s: %s", record.record_id, issue.severity, issue.message)
    print(f"estimated {len(manifest.records) - failures}/{len(manifest.records)} "
          f"records into {out_dir}")
    return 1 if failures else 0


def cmd_selftest(args) -> int:
    registry = _load_registry(args)
    rng = np.random.default_rng(args.seed)
    failures = 0

    def check(name, condition):
        nonlocal failures
        print(f"{'PASS' if condition else 'FAIL'}  {name}")
        failures += not condition

    check("registry has 9 modules / 26 parameters",
          len(registry.modules) == 9 and registry.total_params == 26)
    comp = registry.module("compressor").param("threshold_db")
    check("compressor threshold coarse grid is [-40, -5] step 5",
          (comp.coarse_min, comp.coarse_max, comp.coarse_step) == (-40.0, -5.0, 5.0))
    check("normalize(-19 dB threshold) = 0.6",
          abs(normalize_param("compressor", "threshold_db", -19.0, registry) - 0.6) < 1e-12)
    check("quantize(gain 3.1, coarse) = 4.0",
          quantize_param("gain", "gain_db", 3.1, "coarse", registry) == 4.0)

    noise = synth_test_signal("pink_noise", 0.5)
    neutral = [
        ("gain", {"gain_db": 0.0}),
        ("panner", {"pan": 0.0}),
        ("stereo_widener", {"width": 1.0}),
    ]
    for tool, arguments in neutral:
        output, _ = render_chain(FxChain((FxCall(tool, arguments),)), noise, registry)
        check(f"{tool} neutral parameters are an identity",
              float(np.max(np.abs(output.data - noise.data))) < 1e-6)

    ok = True
    for _ in range(100):
        length = int(rng.integers(1, 10))
        chain = sample_chain(rng, length, "coarse", registry)
        ok &= parse_toolcalls(emit_toolcalls(chain, registry), registry).chain == chain
    check("100 sampled chains round-trip through the codec", ok)

    chain = sample_chain(rng, 9, "fine", registry)
    reverse = FxChain(tuple(reversed(chain.calls)))
    check("order correlation: identity 1.0, full reversal -1.0",
          order_spearman(chain, chain, registry) == 1.0
          and abs(order_spearman(reverse, chain, registry) + 1.0) < 1e-12)

    check("number-token loss on the uniform-digits case is 2.5",
          ntl_was([np.full(10, 0.1)], list(range(10)), [5.0]) == 2.5)

    print(f"{'OK' if not failures else str(failures) + ' failure(s)'}")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fxchain",
        description="Audio effects chain tooling: render, sample, synthesize, parse, evaluate.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED,
                        help=f"global RNG seed (default {DEFAULT_SEED})")
    parser.add_argument("--registry", default=None,
                        help="JSON file overriding the built-in effect registry")
    parser.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error"])
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("render", help="apply a chain file to a WAV")
    p.add_argument("chain_file")
    p.add_argument("in_wav")
    p.add_argument("out_wav")
    p.set_defaults(func=cmd_render)

    p = commands.add_parser("sample", help="sample a random chain")
    p.add_argument("--length", type=int, default=3)
    p.add_argument("--regime", choices=["coarse", "fine"], default="coarse")
    p.add_argument("--baseline", choices=["no_fx", "random_fx"], default=None)
    p.add_argument("--format", choices=["toolcalls", "json"], default="toolcalls")
    p.set_defaults(func=cmd_sample)

    p = commands.add_parser("parse", help="parse tool-call text (file or stdin)")
    p.add_argument("file", nargs="?", default=None)
    p.add_argument("--policy", choices=["strict", "clamp"], default="strict")
    p.set_defaults(func=cmd_parse)

    corpus = commands.add_parser("corpus", help="corpus synthesis").add_subparsers(
        dest="corpus_command", required=True)
    p = corpus.add_parser("build", help="synthesize a stratified corpus")
    p.add_argument("--sources", required=True, help="directory of dry WAV sources")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", dest="build_seed", type=int, default=None,
                   help="overrides the global --seed for this build")
    p.add_argument("--regime", choices=["coarse", "fine"], default="coarse")
    p.add_argument("--lengths", default="1..9", help="e.g. 1..9 or 1,3,5")
    p.add_argument("--per-length", type=int, default=10)
    p.add_argument("--target-rms", type=float, default=-20.0)
    p.add_argument("--jobs", type=int, default=0, help="0 = all cores")
    p.set_defaults(func=cmd_corpus_build)

    p = commands.add_parser("make-signals", help="write deterministic test WAVs")
    p.add_argument("--out", required=True)
    p.add_argument("--duration", type=float, default=2.0)
    p.add_argument("--rate", type=int, default=44100)
    p.set_defaults(func=cmd_make_signals)

    evaluate = commands.add_parser("eval", help="metric evaluation").add_subparsers(
        dest="eval_command", required=True)
    p = evaluate.add_parser("run", help="score per-record prediction chains")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--embeddings", default=None,
                   help="JSON of record id -> encoder -> {ref, est} vectors")
    p.add_argument("--out", default="eval-out")
    p.add_argument("--jobs", type=int, default=0, help="0 = all cores")
    p.add_argument("--plot", action="store_true",
                   help="emit dry/ref/pred spectrogram PNGs")
    p.set_defaults(func=cmd_eval_run)

    gateway = commands.add_parser("gateway", help="LLM endpoint client").add_subparsers(
        dest="gateway_command", required=True)
    p = gateway.add_parser("estimate", help="ask an endpoint to estimate chains")
    p.add_argument("--manifest", required=True)
    p.add_argument("--endpoint", required=True, help="chat-completion URL to POST to")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="directory for predicted chain files")
    p.add_argument("--api-key-env", default="", help="env var holding the bearer token")
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--retries", type=int, default=2)
    p.add_argument("--transcript", default=None, help="JSONL transcript to append to")
    p.add_argument("--replay", default=None, help="answer from this transcript instead of the network")
    p.set_defaults(func=cmd_gateway_estimate)

    p = commands.add_parser("selftest", help="run the quick invariant suite")
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())
