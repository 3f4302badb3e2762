#!/usr/bin/env python3
"""Parse model output into chains and emit chains back onto the wire.

Shows the block grammar, the single-quote repair path, chain-of-thought
capture, and the clamp policy fixing an out-of-range argument.
"""

from fxchain import emit_toolcalls, parse_toolcalls

model_reply = """\
<think>Width first for space, then a touch of drive.</think>
<tool_call>
{'name': 'stereo_widener', 'arguments': {'width': 1.3}}
</tool_call>
<tool_call>
{"name": "distortion", "arguments": {"drive_db": 25.0}}
</tool_call>
Here is the chain you asked for."""

document = parse_toolcalls(model_reply, policy="clamp")

print("chain-of-thought:", document.cot)
print("tools:", ", ".join(document.chain.tools))
print("response:", document.trailing_response.strip())
for issue in document.report.issues:
    print(f"  [{issue.severity}] {issue.message}")

print("\ncanonical wire form:")
print(emit_toolcalls(document.chain))

again = parse_toolcalls(emit_toolcalls(document.chain)).chain
print("\nround trip preserved the chain:", again == document.chain)
