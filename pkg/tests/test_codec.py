from __future__ import annotations

import json

import numpy as np
import pytest

from fxchain.codec import (
    ToolCallError,
    chain_from_jsonable,
    chain_to_jsonable,
    emit_toolcalls,
    format_wire_number,
    load_chain,
    parse_toolcalls,
    save_chain,
)
from fxchain.corpus import sample_chain
from fxchain.registry import FxCall, FxChain

# The worked three-call example in the single-quoted form models emit it in.
WORKED_EXAMPLE = (
    "<tool_call>\n{'name': 'stereo_widener', 'arguments': {'width': 1.3}}\n</tool_call>\n"
    "<tool_call>\n{'name': 'distortion', 'arguments': {'drive_db': 5.0}}\n</tool_call>\n"
    "<tool_call>\n{'name': 'compressor', 'arguments': {'threshold_db': -19.0, "
    "'ratio': 4.0, 'attack_ms': 250.0, 'release_ms': 250.0}}\n</tool_call>"
)

WORKED_CHAIN = FxChain((
    FxCall("stereo_widener", {"width": 1.3}),
    FxCall("distortion", {"drive_db": 5.0}),
    FxCall("compressor", {"threshold_db": -19.0, "ratio": 4.0,
                          "attack_ms": 250.0, "release_ms": 250.0}),
))


def test_minimal_block():
    doc = parse_toolcalls('<tool_call>\n{"name": "gain", "arguments": {"gain_db": 0.0}}\n</tool_call>')
    assert doc.chain == FxChain((FxCall("gain", {"gain_db": 0.0}),))
    assert doc.report.ok
    assert doc.cot is None


def test_worked_example_parses_with_repair_warnings():
    doc = parse_toolcalls(WORKED_EXAMPLE)
    assert doc.chain == WORKED_CHAIN
    assert doc.report.ok
    assert all("repaired" in w.message for w in doc.report.warnings)


def test_zero_blocks_is_not_an_error():
    doc = parse_toolcalls("no tools here")
    assert doc.chain == FxChain(())
    assert doc.trailing_response == "no tools here"
    assert doc.report.ok


def test_think_prefix_and_trailing_response():
    text = ("<think>widen first, then saturate</think>\n"
            '<tool_call>\n{"name": "stereo_widener", "arguments": {"width": 1.2}}\n</tool_call>\n'
            "Here is your chain.")
    doc = parse_toolcalls(text)
    assert doc.cot == "widen first, then saturate"
    assert doc.trailing_response.strip() == "Here is your chain."
    assert doc.chain.tools == ("stereo_widener",)


def test_block_order_is_preserved():
    rng = np.random.default_rng(2)
    chain = sample_chain(rng, 6, "coarse")
    doc = parse_toolcalls(emit_toolcalls(chain))
    assert doc.chain.tools == chain.tools


def test_malformed_json_names_block_and_offset():
    text = ('<tool_call>\n{"name": "gain", "arguments": {"gain_db": 0.0}}\n</tool_call>\n'
            "<tool_call>\n{this is not json}\n</tool_call>")
    with pytest.raises(ToolCallError) as info:
        parse_toolcalls(text)
    assert info.value.block_index == 1
    assert info.value.offset is not None
    assert "block 1" in str(info.value)


def test_block_must_be_name_arguments_object():
    with pytest.raises(ToolCallError):
        parse_toolcalls("<tool_call>\n[1, 2, 3]\n</tool_call>")
    with pytest.raises(ToolCallError):
        parse_toolcalls('<tool_call>\n{"tool": "gain"}\n</tool_call>')


def test_policy_handling_of_bad_values():
    text = '<tool_call>\n{"name": "distortion", "arguments": {"drive_db": 25.0}}\n</tool_call>'
    strict = parse_toolcalls(text, policy="strict")
    assert not strict.report.ok
    clamp = parse_toolcalls(text, policy="clamp")
    assert clamp.report.ok
    assert clamp.chain.calls[0].arguments["drive_db"] == 20.0

    text = '<tool_call>\n{"name": "gain", "arguments": {"gain_db": "loud"}}\n</tool_call>'
    assert not parse_toolcalls(text, policy="strict").report.ok
    repaired = parse_toolcalls(text, policy="clamp")
    assert repaired.chain == FxChain(())  # unrepairable call is dropped
    assert not repaired.report.ok


def test_emit_format_exact():
    assert emit_toolcalls(FxChain((FxCall("panner", {"pan": -0.6}),))) == (
        '<tool_call>\n{"name": "panner", "arguments": {"pan": -0.6}}\n</tool_call>'
    )
    assert emit_toolcalls(FxChain(())) == ""


def test_emit_orders_keys_by_schema():
    chain = FxChain((FxCall("compressor", {"release_ms": 250.0, "attack_ms": 250.0,
                                           "ratio": 4.0, "threshold_db": -19.0}),))
    body = emit_toolcalls(chain).splitlines()[1]
    parsed = json.loads(body)
    assert list(parsed["arguments"]) == ["threshold_db", "ratio", "attack_ms", "release_ms"]


def test_emit_rejects_invalid_chains():
    with pytest.raises(ToolCallError):
        emit_toolcalls(FxChain((FxCall("gain", {"gain_db": 999.0}),)))
    with pytest.raises(ToolCallError):
        emit_toolcalls(FxChain((FxCall("gain", {}),)))


def test_wire_number_format():
    assert format_wire_number(250.0) == "250.0"
    assert format_wire_number(-19.0) == "-19.0"
    assert format_wire_number(0.35) == "0.35"
    assert format_wire_number(20000.0) == "20000.0"
    assert format_wire_number(0.05) == "0.05"
    assert format_wire_number(1.3) == "1.3"


def test_round_trip_sampled_chains():
    rng = np.random.default_rng(7)
    for _ in range(200):
        length = int(rng.integers(1, 10))
        regime = "fine" if rng.integers(2) else "coarse"
        chain = sample_chain(rng, length, regime)
        again = parse_toolcalls(emit_toolcalls(chain)).chain
        assert again == chain  # dataclass equality covers bit-equal floats


def test_round_trip_off_grid_values(registry):
    # any in-coarse-range float survives the wire, not just grid points
    rng = np.random.default_rng(41)
    for _ in range(100):
        calls = []
        for module in registry.modules:
            args = {
                p.name: float(rng.uniform(p.coarse_min, p.coarse_max))
                for p in module.params
            }
            calls.append(FxCall(module.name, args))
        subset = FxChain(tuple(calls[: int(rng.integers(1, 10))]))
        assert parse_toolcalls(emit_toolcalls(subset)).chain == subset


def test_parser_survives_noise_bytes():
    rng = np.random.default_rng(13)
    crashes = 0
    for _ in range(1000):
        blob = rng.bytes(rng.integers(1, 300)).decode("latin-1")
        try:
            parse_toolcalls(blob, policy="clamp")
        except ToolCallError:
            pass
        except Exception:
            crashes += 1
    assert crashes == 0


def test_parser_survives_adversarial_blocks():
    hostile = [
        "<tool_call></tool_call>",
        "<tool_call>null</tool_call>",
        '<tool_call>{"name": 3, "arguments": {}}</tool_call>',
        '<tool_call>{"name": "gain", "arguments": []}</tool_call>',
        "<tool_call>{'name': 'gain', 'arguments': {1: 2}}</tool_call>",
        "<tool_call><tool_call></tool_call>",
    ]
    for text in hostile:
        with pytest.raises(ToolCallError):
            parse_toolcalls(text)


def test_chain_file_round_trip(tmp_path):
    rng = np.random.default_rng(23)
    chain = sample_chain(rng, 5, "fine")
    path = tmp_path / "chain.json"
    save_chain(path, chain)
    assert load_chain(path) == chain
    doc = json.loads(path.read_text())
    assert set(doc) == {"calls"}
    assert chain_from_jsonable(chain_to_jsonable(chain)) == chain


def test_chain_file_errors(tmp_path):
    with pytest.raises(ToolCallError, match="gone.json"):
        load_chain(tmp_path / "gone.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ToolCallError):
        load_chain(bad)
    wrong = tmp_path / "wrong.json"
    wrong.write_text('{"calls": [{"tool": 5}]}')
    with pytest.raises(ToolCallError):
        load_chain(wrong)
