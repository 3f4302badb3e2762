"""Wire codec for the tool-call block format emitted by chat models.

The wire contract is one JSON object per block:

    <tool_call>
    {"name": "<module>", "arguments": {"<param>": <number>, ...}}
    </tool_call>

Blocks are joined by newlines; an optional leading <think>...</think> section
carries chain-of-thought text, and anything after the last block is the
assistant's natural-language response. Chains also serialize to a standalone
JSON document: {"calls": [{"tool": ..., "arguments": {...}}, ...]}.
"""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass
from pathlib import Path

from .registry import (
    FxCall,
    FxChain,
    FxRegistry,
    ValidationIssue,
    ValidationReport,
    registry_default,
    validate_chain,
)

_TOOLCALL_RE = re.compile(r"<tool_call>(.*?)</tool_call>", re.DOTALL)
_THINK_RE = re.compile(r"\A\s*<think>(.*?)</think>", re.DOTALL)


class ToolCallError(ValueError):
    """Malformed tool-call block. Carries the block index and byte offset."""

    def __init__(self, message: str, block_index: int | None = None, offset: int | None = None):
        super().__init__(message)
        self.block_index = block_index
        self.offset = offset


@dataclass(frozen=True)
class ToolCallDocument:
    """Structured view of one model reply: calls, response text, optional CoT."""

    raw_text: str
    calls: tuple[FxCall, ...]
    trailing_response: str
    cot: str | None
    report: ValidationReport

    @property
    def chain(self) -> FxChain:
        return FxChain(self.calls)


def _parse_block(body: str, index: int, offset: int) -> tuple[FxCall, ValidationIssue | None]:
    repair: ValidationIssue | None = None
    try:
        obj = json.loads(body)
    except json.JSONDecodeError:
        # Models regularly emit python-style single-quoted objects; accept
        # them via a safe literal parse and surface a warning.
        try:
            obj = ast.literal_eval(body)
        except (ValueError, SyntaxError, TypeError, MemoryError, RecursionError) as exc:
            raise ToolCallError(
                f"block {index}: malformed JSON at byte offset {offset}: {exc}",
                block_index=index, offset=offset,
            ) from exc
        repair = ValidationIssue(
            "warning", f"block {index}: repaired non-JSON (single-quoted) object", index,
        )
    if not isinstance(obj, dict):
        raise ToolCallError(
            f"block {index}: expected a JSON object at byte offset {offset}",
            block_index=index, offset=offset,
        )
    name = obj.get("name")
    arguments = obj.get("arguments")
    if not isinstance(name, str) or not isinstance(arguments, dict) \
            or any(not isinstance(k, str) for k in arguments):
        raise ToolCallError(
            f"block {index}: expected string 'name' and object 'arguments' "
            f"at byte offset {offset}",
            block_index=index, offset=offset,
        )
    return FxCall(tool=name, arguments=dict(arguments)), repair


def parse_toolcalls(text: str, registry: FxRegistry | None = None,
                    policy: str = "strict") -> ToolCallDocument:
    """Extract every tool-call block from arbitrary model output.

    Zero blocks is not an error: the result is an empty chain with the whole
    text as the response. The extracted chain is validated with the given
    policy; under clamp the document carries the repaired chain.
    """
    registry = registry or registry_default()
    if not isinstance(text, str):
        raise ToolCallError(f"expected text, got {type(text).__name__}")
    think = _THINK_RE.match(text)
    cot = think.group(1).strip() if think else None
    scan_from = think.end() if think else 0

    raw_calls: list[FxCall] = []
    codec_issues: list[ValidationIssue] = []
    last_end = scan_from
    for index, match in enumerate(_TOOLCALL_RE.finditer(text, scan_from)):
        call, repair = _parse_block(match.group(1).strip(), index, match.start(1))
        raw_calls.append(call)
        if repair is not None:
            codec_issues.append(repair)
        last_end = match.end()

    validation = validate_chain(FxChain(tuple(raw_calls)), registry, policy)
    calls = validation.repaired.calls if policy == "clamp" else tuple(raw_calls)
    return ToolCallDocument(
        raw_text=text,
        calls=calls,
        trailing_response=text[last_end:],
        cot=cot,
        report=ValidationReport(
            issues=tuple(codec_issues) + validation.issues,
            repaired=validation.repaired,
        ),
    )


def format_wire_number(value: float) -> str:
    """Render a number with 6 significant digits when that is lossless.

    Grid values always fit 6 digits; off-grid values fall back to the
    shortest exact repr so parse(emit(chain)) stays bit-exact for any
    strict-valid chain. Integral values keep one trailing decimal.
    """
    value = float(value)
    text = f"{value:.6g}"
    if float(text) != value:
        text = repr(value)
    if "." not in text and "e" not in text and "E" not in text:
        text += ".0"
    return text


def emit_toolcalls(chain: FxChain, registry: FxRegistry | None = None) -> str:
    """Render a strict-valid chain as tool-call blocks. parse(emit(c)) == c."""
    registry = registry or registry_default()
    report = validate_chain(chain, registry, policy="strict")
    if not report.ok:
        raise ToolCallError(f"cannot emit invalid chain: {report.errors[0].message}")
    blocks = []
    for call in chain.calls:
        module = registry.module(call.tool)
        args = ", ".join(
            f'"{p.name}": {format_wire_number(call.arguments[p.name])}'
            for p in module.params
        )
        blocks.append(
            f'<tool_call>\n{{"name": "{call.tool}", "arguments": {{{args}}}}}\n</tool_call>'
        )
    return "\n".join(blocks)


def chain_to_jsonable(chain: FxChain) -> dict:
    return {
        "calls": [
            {"tool": call.tool, "arguments": dict(call.arguments)}
            for call in chain.calls
        ]
    }


def chain_from_jsonable(doc: dict) -> FxChain:
    if not isinstance(doc, dict) or not isinstance(doc.get("calls"), list):
        raise ToolCallError("chain document must be an object with a 'calls' list")
    calls = []
    for index, entry in enumerate(doc["calls"]):
        if not isinstance(entry, dict) or not isinstance(entry.get("tool"), str) \
                or not isinstance(entry.get("arguments"), dict):
            raise ToolCallError(f"chain document call {index} is malformed")
        calls.append(FxCall(tool=entry["tool"], arguments=dict(entry["arguments"])))
    return FxChain(tuple(calls))


def save_chain(path, chain: FxChain) -> None:
    Path(path).write_text(json.dumps(chain_to_jsonable(chain), indent=2) + "\n")


def load_chain(path) -> FxChain:
    path = Path(path)
    if not path.is_file():
        raise ToolCallError(f"no such chain file: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ToolCallError(f"chain file {path} is not valid JSON: {exc}") from exc
    return chain_from_jsonable(doc)
