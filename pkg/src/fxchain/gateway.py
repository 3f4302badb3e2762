"""Client plumbing for using a chat-completion endpoint as a chain estimator.

Ships the prompt templates (conversation synthesis, chain-of-thought
synthesis, and the two judge rubrics), a retrying HTTP client speaking the
lowest-common-denominator chat-completion shape, a JSONL transcript
recorder/replayer, and the two non-neural baselines. Remote models receive
audio as rendered feature descriptors, not waveforms.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import requests

from .audio import AudioBuffer
from .corpus import sample_chain
from .metrics import AfVector, af_features
from .registry import FxChain, FxRegistry, registry_default, registry_to_jsonable

INSTRUCTION_FOLLOWING_TEMPLATE = """\
You are a post-production assistant (mixing and mastering) specialized in audio processing and VST plugin chains.
Complete the following conversation.

Output:
[
    {{
        "role": "user",
        "content": [user_instruction]
    }},
    {{
        "role": "assistant",
        "content": [assistant_response]
    }}
]

Tools:
{fx_chain}

Requirements:
- User requests audio effect parameters of the reference audio. {str_user_instruction} {str_user_request_specific_fx}
- The reference audio contains {genre} {instrument} sounds.
- In the assistant message, please keep tool number {tool_numer} and the tool order {tool_order}
- In the assistant message, briefly explain the audio effect type, order and parameters with natural language description. Please provide objective information, don't use overly subjective words. Please answer with a short and concise description.
"""

CHAIN_OF_THOUGHT_TEMPLATE = """\
You are a post-production assistant (mixing and mastering) specialized in audio processing and VST plugin chains.
Given a Audio Effects Chain and a previous tool-based chat conversation, generate the next chain-of-thought plan.
Return ONLY a single valid JSON object. Do not include any text before or after the JSON. Do not use markdown fences.

Outputs:
{{
    "chain_of_thought": "<think>For [task description], Step1,.. Step2,..  </think>"
}}

Where:
- task description: The task description is the user's request.
- chain_of_thought: A step-by-step explanation that covers:
- Step 1. From the reference audio, identify the category and order of audio effects in the chain. Do not specify exact values.
- Step 2. Create an FX parameter prediction plan that describes the general direction and approach for each effect's parameters without specifying exact values.

Constraints:
- Use the provided Audio Effects Chain for effect and parameter names; match names exactly.
- Chain of thought reflects the assistant's thinking process for analysis and parameter prediction.

Audio Effects Chain:
{vst_info}

conversations:
{conversation}
"""

JUDGE_DATASET_TEMPLATE = """\
You are an expert evaluator for audio post-production conversations involving VST plugin chains.
Evaluate the assistant's response in the given conversation based on the following criteria.

Use scores to show the quality of the response. Here is the detailed scoring rubric for evaluating the quality of responses
from AI assistants:
# Tool Alignment (Order, Direction, Parameter Accuracy):
Poor (1): Significant misalignment with tool chain order, incorrect parameter directions, and highly inaccurate parameter values that would produce undesirable audio results.
Fair (2): Partial alignment with tool order but contains noticeable errors in parameter direction or accuracy.
Good (3): Strong alignment with tool order, correct parameter directions, and accurate parameter values with only minor room for improvement.
Excellent (4): Perfect alignment with tool chain order, correct parameter directions, and highly accurate parameter values demonstrating expert-level understanding.

# Thought Quality:
Poor (1): Illogical chain of thought lacking coherent reasoning about audio processing decisions.
Fair (2): Basic reasoning but contains gaps in logic or limited understanding of audio processing principles.
Good (3): Strong reasoning with clear understanding of effect interactions and good audio processing knowledge.
Excellent (4): Expert-level reasoning with sophisticated understanding of complex effect interactions.
{{
    "tool_alignment": {{
        "score": [1, 2, 3, 4],
    }},
    "thought_quality": {{
        "score": [1, 2, 3, 4],
    }},
}}

Tool calling ground truth:
{fx_chain}

Conversation to evaluate:
{conversation}
"""

JUDGE_NLG_TEMPLATE = """\
You are an expert evaluator for audio post-production conversations involving VST plugin chains.
Evaluate the assistant's response in the given conversation based on the following criteria.

Use scores to show the quality of the response. Here is the detailed scoring rubric for evaluating the quality of responses
from AI assistants:
# Instruction Following Quality:
Poor (1): The response does not follow the user's instructions, ignores key requirements, or provides irrelevant information. The answer is not in natural language or does not address the task described in the instruction.
Fair (2): The response partially follows the instructions, but misses important details or only addresses some aspects of the user's request. The natural language answer may be incomplete or only loosely related to the instruction.
Good (3): The response follows the instructions well, addresses most requirements, and provides a mostly complete and relevant answer in natural language that matches the task in the instruction, but may lack some detail or completeness.
Excellent (4): The response fully follows the user's instructions, addresses all requirements in detail, and provides a clear, relevant, and comprehensive answer in natural language that is directly aligned with the task described in the instruction.

# Chain of Thought Quality:
Poor (1): The chain of thought does not logically connect the user's query to the assistant's response, lacking coherent reasoning about audio processing decisions. The reasoning fails to demonstrate proper task decomposition, analysis of user input, and planning for effect chain implementation. Or the chain of thought is empty.
Fair (2): The reasoning attempts to bridge the user's query and the assistant's response but contains gaps in logic or shows limited understanding of audio processing principles. Some evidence of task decomposition and planning to handle user input may be present but incomplete or flawed.
Good (3): The chain of thought clearly links the user's query to the assistant's response, demonstrating effective task decomposition and planning. The reasoning provides clear evidence of user input analysis and systematic planning to handle requirements with mostly sound logic.
Excellent (4): The reasoning expertly bridges the user's query and the assistant's response through comprehensive task decomposition and strategic planning. The analysis demonstrates thorough task decomposition, comprehensive planning to handle user input, and expert-level reasoning throughout the process.
{{
    "instruction_following_quality": {{
        "score": [1, 2, 3, 4],
    }},
    "chain_of_thought_quality": {{
        "score": [1, 2, 3, 4],
    }},
}}
Conversation to evaluate:
{conversation}
Chain of thought:
{cot}
"""

PROMPT_TEMPLATES = {
    "instruction_following": INSTRUCTION_FOLLOWING_TEMPLATE,
    "chain_of_thought": CHAIN_OF_THOUGHT_TEMPLATE,
    "judge_dataset": JUDGE_DATASET_TEMPLATE,
    "judge_nlg": JUDGE_NLG_TEMPLATE,
}

BASELINE_KINDS = ("no_fx", "random_fx")

_RETRY_BACKOFF_S = 0.25


class GatewayError(RuntimeError):
    """Prompt-rendering failure or endpoint failure after retries."""


@dataclass(frozen=True)
class EndpointConfig:
    """Where and how to reach the chat-completion endpoint.

    The API key is read from the named environment variable at request time
    and never persisted anywhere.
    """

    base_url: str
    model_name: str
    api_key_env_var: str = ""
    timeout_s: float = 30.0
    max_retries: int = 2

    def __post_init__(self) -> None:
        if self.timeout_s <= 0:
            raise ValueError(f"timeout must be positive, got {self.timeout_s}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries}")


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    tool_schema_json: str = ""


class _StrictFields(dict):
    def __missing__(self, key):
        raise GatewayError(f"missing placeholder: {key!r}")


def render_prompt(template: str, fields: dict,
                  registry: FxRegistry | None = None) -> PromptBundle:
    """Substitute fields into one of the shipped templates, verbatim.

    The first line of each template is the persona and becomes the system
    text; the remainder is the user text. Every placeholder must be present
    in fields or the error names it.
    """
    if template not in PROMPT_TEMPLATES:
        raise GatewayError(f"unknown template {template!r} "
                           f"(have {', '.join(sorted(PROMPT_TEMPLATES))})")
    rendered = PROMPT_TEMPLATES[template].format_map(_StrictFields(fields))
    system_text, _, user_text = rendered.partition("\n")
    schema = json.dumps(registry_to_jsonable(registry)) if registry is not None else ""
    return PromptBundle(system_text=system_text, user_text=user_text, tool_schema_json=schema)


def _build_payload(config: EndpointConfig, bundle: PromptBundle) -> dict:
    messages = []
    if bundle.system_text:
        messages.append({"role": "system", "content": bundle.system_text})
    messages.append({"role": "user", "content": bundle.user_text})
    return {"model": config.model_name, "messages": messages}


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _extract_text(body: dict) -> str:
    try:
        return body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise GatewayError(f"response is not chat-completion shaped: {exc!r}") from exc


def query_estimator(config: EndpointConfig, bundle: PromptBundle,
                    transcript_path=None) -> str:
    """POST the bundle to the endpoint and return the assistant text.

    Transient failures (connection errors, timeouts, 5xx) are retried with
    exponential backoff up to max_retries. When a transcript path is given,
    the request/response pair is appended as one JSONL line.
    """
    payload = _build_payload(config, bundle)
    headers = {"Content-Type": "application/json"}
    if config.api_key_env_var:
        key = os.environ.get(config.api_key_env_var, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
    attempts = 0
    last_error = None
    text = None
    status = None
    while attempts <= config.max_retries:
        attempts += 1
        try:
            response = requests.post(config.base_url, json=payload,
                                     headers=headers, timeout=config.timeout_s)
        except (requests.ConnectionError, requests.Timeout) as exc:
            last_error = f"network failure: {exc}"
        else:
            status = response.status_code
            if status >= 500:
                last_error = f"server error {status}: {response.text[:200]}"
            elif status >= 400:
                raise GatewayError(f"endpoint rejected request ({status}): {response.text[:200]}")
            else:
                text = _extract_text(response.json())
                break
        if attempts <= config.max_retries:
            time.sleep(_RETRY_BACKOFF_S * 2 ** (attempts - 1))
    if text is None:
        raise GatewayError(f"endpoint failed after {attempts} attempts: {last_error}")
    if transcript_path is not None:
        entry = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "request": payload,
            "status": status,
            "attempts": attempts,
            "response_text": text,
        }
        with open(transcript_path, "a") as handle:
            handle.write(json.dumps(entry) + "\n")
    return text


def replay_estimator(config: EndpointConfig, bundle: PromptBundle, transcript_path) -> str:
    """Resolve a request against a recorded transcript, no network involved."""
    path = Path(transcript_path)
    if not path.is_file():
        raise GatewayError(f"no such transcript: {path}")
    wanted = _canonical(_build_payload(config, bundle))
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        entry = json.loads(line)
        if _canonical(entry["request"]) == wanted:
            return entry["response_text"]
    raise GatewayError(f"transcript {path} has no entry for this request")


def baseline_predict(kind: str, rng: np.random.Generator,
                     registry: FxRegistry | None = None, regime: str = "coarse") -> FxChain:
    """Non-neural baselines: an empty chain, or a fully random one."""
    registry = registry or registry_default()
    if kind == "no_fx":
        return FxChain(())
    if kind == "random_fx":
        length = int(rng.integers(1, len(registry.modules) + 1))
        return sample_chain(rng, length, regime, registry)
    raise ValueError(f"unknown baseline {kind!r} (have {', '.join(BASELINE_KINDS)})")


def describe_features(features: AfVector) -> str:
    """Compact one-line text rendering of an AF vector for prompts."""
    bark = ", ".join(f"{v:.1f}" for v in features.bark_spectrum_db)
    return (
        f"rms {features.rms_dbfs:.2f} dBFS, crest {features.crest_factor_db:.2f} dB, "
        f"stereo width {features.stereo_width:.3f}, stereo imbalance "
        f"{features.stereo_imbalance:.3f}, bark spectrum dB [{bark}]"
    )


def estimation_fields(dry: AudioBuffer, ref: AudioBuffer, registry: FxRegistry | None = None,
                      genre: str = "unknown genre", instrument: str = "instrument") -> dict:
    """Fields for the instruction_following template in the estimate flow.

    Audio goes in as feature descriptors; the Tools section carries the
    registry schema so the model knows the legal modules and ranges.
    """
    registry = registry or registry_default()
    instruction = (
        "Estimate the effect chain that turns the dry audio into the reference audio. "
        f"Dry audio features: {describe_features(af_features(dry))}. "
        f"Reference audio features: {describe_features(af_features(ref))}. "
        "Reply with one <tool_call>...</tool_call> block per effect, in processing order, "
        'each containing {"name": ..., "arguments": {...}}.'
    )
    return {
        "fx_chain": json.dumps(registry_to_jsonable(registry)),
        "str_user_instruction": instruction,
        "str_user_request_specific_fx": "",
        "genre": genre,
        "instrument": instrument,
        "tool_numer": "between 1 and 9",
        "tool_order": "as inferred from the audio",
    }
