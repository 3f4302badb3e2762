from __future__ import annotations

import json

import numpy as np
import pytest

from fxchain.cli import main
from fxchain.codec import save_chain
from fxchain.corpus import load_manifest
from fxchain.registry import FxCall, FxChain


@pytest.fixture(scope="module")
def cli_corpus(tmp_path_factory):
    """Signals + corpus built through the CLI itself."""
    root = tmp_path_factory.mktemp("cli")
    signals = root / "signals"
    assert main(["make-signals", "--out", str(signals), "--duration", "1.0"]) == 0
    corpus = root / "corpus"
    code = main([
        "--seed", "505", "corpus", "build", "--sources", str(signals),
        "--out", str(corpus), "--regime", "fine", "--lengths", "1..3",
        "--per-length", "2",
    ])
    assert code == 0
    return corpus


def test_corpus_build_output(cli_corpus):
    manifest = load_manifest(cli_corpus / "manifest.json")
    assert len(manifest.records) == 6
    assert manifest.config.seed == 505
    assert (cli_corpus / "dry").is_dir() and (cli_corpus / "ref").is_dir()


def test_corpus_build_accepts_inline_seed(cli_corpus, tmp_path):
    signals = cli_corpus.parent / "signals"
    out = tmp_path / "inline-seed"
    code = main(["corpus", "build", "--seed", "505", "--sources", str(signals),
                 "--out", str(out), "--regime", "fine", "--lengths", "1..3",
                 "--per-length", "2"])
    assert code == 0
    manifest = load_manifest(out / "manifest.json")
    reference = load_manifest(cli_corpus / "manifest.json")
    assert [r.chain for r in manifest.records] == [r.chain for r in reference.records]


def test_render_round_trip(cli_corpus, tmp_path, capsys):
    manifest = load_manifest(cli_corpus / "manifest.json")
    record = manifest.records[0]
    chain_file = tmp_path / "chain.json"
    save_chain(chain_file, record.chain)
    out_wav = tmp_path / "out.wav"
    assert main(["render", str(chain_file), record.dry_path, str(out_wav)]) == 0
    printed = capsys.readouterr().out
    assert record.chain.tools[0] in printed
    from fxchain.audio import read_wav
    rendered = read_wav(out_wav)
    reference = read_wav(record.ref_path)
    assert np.array_equal(rendered.data, reference.data)


def test_render_missing_input_names_path(tmp_path, capsys):
    chain_file = tmp_path / "chain.json"
    save_chain(chain_file, FxChain((FxCall("gain", {"gain_db": 0.0}),)))
    code = main(["render", str(chain_file), str(tmp_path / "ghost.wav"),
                 str(tmp_path / "out.wav")])
    assert code == 1
    assert "ghost.wav" in capsys.readouterr().err


def test_render_unknown_tool_names_tool(cli_corpus, tmp_path, capsys):
    manifest = load_manifest(cli_corpus / "manifest.json")
    chain_file = tmp_path / "bad.json"
    chain_file.write_text(json.dumps({"calls": [{"tool": "flanger", "arguments": {}}]}))
    code = main(["render", str(chain_file), manifest.records[0].dry_path,
                 str(tmp_path / "out.wav")])
    assert code == 1
    assert "flanger" in capsys.readouterr().err


def test_sample_emits_parseable_chain(capsys):
    assert main(["--seed", "9", "sample", "--length", "4"]) == 0
    text = capsys.readouterr().out
    from fxchain.codec import parse_toolcalls
    assert len(parse_toolcalls(text).chain) == 4
    assert main(["--seed", "9", "sample", "--length", "2", "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["calls"]) == 2
    assert main(["sample", "--baseline", "no_fx"]) == 0
    assert capsys.readouterr().out.strip() == ""


def test_parse_command(tmp_path, capsys):
    text_file = tmp_path / "reply.txt"
    text_file.write_text(
        '<tool_call>\n{"name": "gain", "arguments": {"gain_db": 2.0}}\n</tool_call>\ndone')
    assert main(["parse", str(text_file)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["calls"][0]["tool"] == "gain"
    assert doc["trailing_response"] == "done"


def test_eval_ground_truth_predictions(cli_corpus, tmp_path, capsys):
    manifest = load_manifest(cli_corpus / "manifest.json")
    pred_dir = tmp_path / "preds"
    pred_dir.mkdir()
    for record in manifest.records:
        save_chain(pred_dir / f"{record.record_id}.json", record.chain)
    out_dir = tmp_path / "eval"
    code = main(["eval", "run", "--manifest", str(cli_corpus / "manifest.json"),
                 "--pred-dir", str(pred_dir), "--out", str(out_dir), "--jobs", "2"])
    assert code == 0
    aggregate = json.loads((out_dir / "aggregate.json").read_text())
    assert aggregate["failed"] == 0
    assert aggregate["means"]["param_mae"] == 0.0
    assert aggregate["means"]["mrs_lr"] == 0.0
    assert aggregate["means"]["effect_accuracy"] == 1.0
    lines = (out_dir / "records.csv").read_text().splitlines()
    assert len(lines) == len(manifest.records) + 1


def test_eval_empty_chain_predictions(cli_corpus, tmp_path):
    manifest = load_manifest(cli_corpus / "manifest.json")
    pred_dir = tmp_path / "nofx"
    pred_dir.mkdir()
    for record in manifest.records:
        save_chain(pred_dir / f"{record.record_id}.json", FxChain(()))
    out_dir = tmp_path / "eval-nofx"
    code = main(["eval", "run", "--manifest", str(cli_corpus / "manifest.json"),
                 "--pred-dir", str(pred_dir), "--out", str(out_dir)])
    assert code == 0
    aggregate = json.loads((out_dir / "aggregate.json").read_text())
    assert aggregate["undefined_correlation"] == len(manifest.records)
    assert aggregate["means"]["mrs_lr"] > 0.0
    assert aggregate["means"]["effect_accuracy"] < 1.0


def test_eval_flags_missing_and_malformed(cli_corpus, tmp_path):
    manifest = load_manifest(cli_corpus / "manifest.json")
    pred_dir = tmp_path / "partial"
    pred_dir.mkdir()
    for record in manifest.records[:-1]:
        save_chain(pred_dir / f"{record.record_id}.json", record.chain)
    (pred_dir / f"{manifest.records[0].record_id}.json").write_text("{broken")
    out_dir = tmp_path / "eval-partial"
    code = main(["eval", "run", "--manifest", str(cli_corpus / "manifest.json"),
                 "--pred-dir", str(pred_dir), "--out", str(out_dir)])
    assert code == 1
    aggregate = json.loads((out_dir / "aggregate.json").read_text())
    assert aggregate["failed"] == 2  # one missing file, one malformed


def test_registry_override(tmp_path, capsys):
    from fxchain.registry import registry_default, registry_to_jsonable

    doc = registry_to_jsonable(registry_default())
    doc["modules"] = doc["modules"][:1]
    override = tmp_path / "registry.json"
    override.write_text(json.dumps(doc))
    assert main(["--registry", str(override), "--seed", "3", "sample", "--length", "1"]) == 0
    text = capsys.readouterr().out
    assert '"name": "three_band_equalizer"' in text


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert "PASS" in out


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        main(["no-such-command"])
    assert info.value.code == 2
