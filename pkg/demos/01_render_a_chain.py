#!/usr/bin/env python3
"""Render an effect chain over a test signal and inspect the trace.

Builds the three-call widener/distortion/compressor chain, applies it to a
second of pink noise, and writes dry/wet WAVs next to this script.
"""

from pathlib import Path

from fxchain import (
    FxCall,
    FxChain,
    render_chain,
    synth_test_signal,
    write_wav,
)

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

chain = FxChain((
    FxCall("stereo_widener", {"width": 1.3}),
    FxCall("distortion", {"drive_db": 5.0}),
    FxCall("compressor", {"threshold_db": -19.0, "ratio": 4.0,
                          "attack_ms": 250.0, "release_ms": 250.0}),
))

dry = synth_test_signal("pink_noise", 1.0, 44100)
wet, trace = render_chain(chain, dry)

print(f"input:  peak {dry.peak():.3f}, rms {dry.rms_dbfs():.1f} dBFS")
for entry in trace.entries:
    print(f"  {entry.tool:<16} peak {entry.peak_in:.3f} -> {entry.peak_out:.3f} "
          f"({entry.wall_s * 1000:.1f} ms)")
print(f"output: peak {wet.peak():.3f}, rms {wet.rms_dbfs():.1f} dBFS")

write_wav(out_dir / "dry.wav", dry)
write_wav(out_dir / "wet.wav", wet)
print(f"wrote {out_dir}/dry.wav and {out_dir}/wet.wav")
