#!/usr/bin/env python3
"""Render gateway prompts and run the estimator loop against a local mock.

Spins up an in-process HTTP endpoint that always answers with a fixed
tool-call reply, queries it the same way a real chat-completion endpoint
would be queried, records the transcript, and replays it offline.
"""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from fxchain import (
    EndpointConfig,
    parse_toolcalls,
    query_estimator,
    registry_default,
    render_prompt,
    replay_estimator,
    synth_test_signal,
)
from fxchain.gateway import estimation_fields

REPLY = ('<tool_call>\n{"name": "gain", "arguments": {"gain_db": 4.0}}\n</tool_call>\n'
         "Raised the level by 4 dB to match the reference.")


class FixedReply(BaseHTTPRequestHandler):
    def do_POST(self):
        self.rfile.read(int(self.headers.get("Content-Length", 0)))
        body = json.dumps({"choices": [{"message": {"content": REPLY}}]}).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


registry = registry_default()

# the judge prompt, rendered verbatim with its placeholders filled
judge = render_prompt("judge_nlg", {
    "conversation": "user: make it wider / assistant: added a stereo widener at 1.3",
    "cot": "<think>Step 1: widener. Step 2: width slightly above unity.</think>",
})
print("judge system text:", judge.system_text)
print("judge rubric begins:", judge.user_text.splitlines()[0], "...\n")

# the estimation prompt conveys audio as feature descriptors
dry = synth_test_signal("pink_noise", 1.0, 44100)
ref = synth_test_signal("sweep", 1.0, 44100)
bundle = render_prompt("instruction_following",
                       estimation_fields(dry, ref, registry), registry)

server = ThreadingHTTPServer(("127.0.0.1", 0), FixedReply)
threading.Thread(target=server.serve_forever, daemon=True).start()
config = EndpointConfig(
    base_url=f"http://127.0.0.1:{server.server_port}/v1/chat/completions",
    model_name="mock-model",
)
transcript = Path(__file__).parent / "output" / "transcript.jsonl"
transcript.parent.mkdir(exist_ok=True)
transcript.unlink(missing_ok=True)

text = query_estimator(config, bundle, transcript_path=transcript)
server.shutdown()
document = parse_toolcalls(text, registry, policy="clamp")
print("estimated chain:", ", ".join(document.chain.tools))
print("assistant said:", document.trailing_response.strip())

offline = replay_estimator(config, bundle, transcript)
print("offline replay identical:", offline == text)
print(f"transcript: {transcript}")
