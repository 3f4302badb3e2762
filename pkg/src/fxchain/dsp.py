"""The nine stereo effect processors and the chain renderer.

All processing is stereo float64 in, stereo float64 out, same length out as
in (reverb and delay tails past the input end are truncated). Every renderer
is pure: per-render filter state lives on the stack, so concurrent renders on
different inputs are safe.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .audio import AudioBuffer
from .registry import FxCall, FxChain, FxRegistry, registry_default, validate_chain

BIQUAD_KINDS = ("low_shelf", "peaking", "high_shelf")

# Amplitudes below this floor are treated as -120 dBFS by level detectors.
_LEVEL_FLOOR = 1e-6

# Freeverb tunings (samples at 44.1 kHz); right channel is offset by the
# stereo spread and everything is rescaled proportionally at 48 kHz.
_COMB_TUNINGS = (1116, 1188, 1277, 1356, 1422, 1491, 1557, 1617)
_ALLPASS_TUNINGS = (556, 441, 341, 225)
_STEREO_SPREAD = 23
_ALLPASS_FEEDBACK = 0.5
_INPUT_GAIN = 0.015


class RenderError(RuntimeError):
    """Invalid chain, unknown tool, or a non-finite sample mid-chain."""

    def __init__(self, message: str, call_index: int | None = None, tool: str | None = None):
        super().__init__(message)
        self.call_index = call_index
        self.tool = tool


@dataclass(frozen=True)
class TraceEntry:
    tool: str
    peak_in: float
    rms_in: float
    peak_out: float
    rms_out: float
    wall_s: float


@dataclass(frozen=True)
class RenderTrace:
    entries: tuple[TraceEntry, ...] = ()


def db_to_gain(db: float) -> float:
    return 10.0 ** (db / 20.0)


def biquad_coeffs(kind: str, gain_db: float, cutoff_hz: float, q: float,
                  sample_rate: int) -> tuple[np.ndarray, np.ndarray]:
    """Audio-cookbook second-order section, normalized so a0 = 1.

    Q below 0.1 (the grid includes 0) is lifted to 0.1. The cutoff must sit
    strictly between 0 and Nyquist.
    """
    if kind not in BIQUAD_KINDS:
        raise ValueError(f"unknown biquad kind {kind!r}")
    if cutoff_hz <= 0:
        raise ValueError(f"cutoff must be positive, got {cutoff_hz}")
    if cutoff_hz >= sample_rate / 2:
        raise ValueError(f"cutoff {cutoff_hz} Hz at or above Nyquist ({sample_rate / 2} Hz)")
    q = max(q, 0.1)
    amp = 10.0 ** (gain_db / 40.0)
    w0 = 2.0 * math.pi * cutoff_hz / sample_rate
    cw = math.cos(w0)
    alpha = math.sin(w0) / (2.0 * q)
    sq = math.sqrt(amp)
    if kind == "peaking":
        b = np.array([1.0 + alpha * amp, -2.0 * cw, 1.0 - alpha * amp])
        a = np.array([1.0 + alpha / amp, -2.0 * cw, 1.0 - alpha / amp])
    elif kind == "low_shelf":
        b = np.array([
            amp * ((amp + 1) - (amp - 1) * cw + 2 * sq * alpha),
            2 * amp * ((amp - 1) - (amp + 1) * cw),
            amp * ((amp + 1) - (amp - 1) * cw - 2 * sq * alpha),
        ])
        a = np.array([
            (amp + 1) + (amp - 1) * cw + 2 * sq * alpha,
            -2 * ((amp - 1) + (amp + 1) * cw),
            (amp + 1) + (amp - 1) * cw - 2 * sq * alpha,
        ])
    else:
        b = np.array([
            amp * ((amp + 1) + (amp - 1) * cw + 2 * sq * alpha),
            -2 * amp * ((amp - 1) + (amp + 1) * cw),
            amp * ((amp + 1) + (amp - 1) * cw - 2 * sq * alpha),
        ])
        a = np.array([
            (amp + 1) - (amp - 1) * cw + 2 * sq * alpha,
            2 * ((amp - 1) - (amp + 1) * cw),
            (amp + 1) - (amp - 1) * cw - 2 * sq * alpha,
        ])
    return b / a[0], a / a[0]


def envelope_follower(level_db: np.ndarray, attack_ms: float, release_ms: float,
                      sample_rate: int) -> np.ndarray:
    """One-pole smoother with per-sample coefficient selection.

    The attack coefficient applies when the input rises above the envelope,
    the release coefficient when it falls. A time constant of 0 ms means the
    envelope tracks the input instantaneously in that direction.
    """
    def coeff(t_ms: float) -> float:
        if t_ms <= 0:
            return 0.0
        return math.exp(-1.0 / (t_ms * sample_rate / 1000.0))

    level_db = np.asarray(level_db, dtype=np.float64)
    n = level_db.shape[0]
    if n == 0:
        return np.empty(0)
    ca, cr = coeff(attack_ms), coeff(release_ms)
    # Plain-float loop: the state-dependent coefficient rules out lfilter.
    levels = level_db.tolist()
    y = levels[0]
    smoothed = [y] * n
    for i in range(1, n):
        x = levels[i]
        c = ca if x > y else cr
        y = c * y + (1.0 - c) * x
        smoothed[i] = y
    return np.asarray(smoothed)


def _linked_level_db(data: np.ndarray) -> np.ndarray:
    level = np.maximum(np.abs(data[0]), np.abs(data[1]))
    return 20.0 * np.log10(np.maximum(level, _LEVEL_FLOOR))


def _fx_gain(data, sample_rate, params):
    return data * db_to_gain(params["gain_db"])


def _fx_panner(data, sample_rate, params):
    # Constant-power balance law normalized to unity at center so pan = 0 is
    # an exact identity; channels are scaled, never mixed.
    theta = (params["pan"] + 1.0) * math.pi / 4.0
    gl = math.cos(theta) / math.cos(math.pi / 4.0)
    gr = math.sin(theta) / math.sin(math.pi / 4.0)
    return np.vstack([data[0] * gl, data[1] * gr])


def _fx_stereo_widener(data, sample_rate, params):
    width = params["width"]
    mid = 0.5 * (data[0] + data[1])
    side = 0.5 * (data[0] - data[1])
    return np.vstack([mid + width * side, mid - width * side])


def _fx_distortion(data, sample_rate, params):
    return np.tanh(db_to_gain(params["drive_db"]) * data)


def _fx_three_band_equalizer(data, sample_rate, params):
    out = data
    bands = (
        ("low_shelf", params["low_gain_db"], params["low_cutoff_freq"], params["low_q_factor"]),
        ("peaking", params["mid_gain_db"], params["mid_cutoff_freq"], params["mid_q_factor"]),
        ("high_shelf", params["high_gain_db"], params["high_cutoff_freq"], params["high_q_factor"]),
    )
    for kind, gain_db, cutoff, q in bands:
        if cutoff <= 0:
            # The coarse grid allows a 0 Hz low cutoff; a shelf there
            # degenerates to an identity, so the band is skipped.
            continue
        b, a = biquad_coeffs(kind, gain_db, cutoff, q, sample_rate)
        out = lfilter(b, a, out, axis=1)
    return out


def _fx_compressor(data, sample_rate, params):
    # Feed-forward hard knee on the linked peak level; a ratio at or below
    # 1 (the coarse grid starts at 0) degrades to an identity.
    ratio = max(params["ratio"], 1.0)
    if ratio == 1.0:
        return data.copy()
    env = envelope_follower(_linked_level_db(data), params["attack_ms"],
                            params["release_ms"], sample_rate)
    gain_db = np.minimum(0.0, (params["threshold_db"] - env) * (1.0 - 1.0 / ratio))
    return data * 10.0 ** (gain_db / 20.0)


def _fx_limiter(data, sample_rate, params):
    # Compressor with infinite ratio and an instantaneous attack: the
    # envelope snaps to the level on rises, so a steady tone's peaks land
    # exactly on the threshold ceiling.
    env = envelope_follower(_linked_level_db(data), 0.0, params["release_ms"], sample_rate)
    gain_db = np.minimum(0.0, params["threshold_db"] - env)
    return data * 10.0 ** (gain_db / 20.0)


def _comb(x: np.ndarray, delay: int, feedback: float, damp: float) -> np.ndarray:
    # y[n] = buf[n-D]; store[n] = (1-damp)*y[n] + damp*store[n-1];
    # buf[n] = x[n] + feedback*store[n]. Processed in blocks of D samples so
    # the damping one-pole can run through lfilter while staying bit-exact
    # with the per-sample recurrence.
    n = x.shape[0]
    out = np.empty(n)
    buf = np.zeros(n + delay)
    state = np.zeros(1)
    b = np.array([1.0 - damp])
    a = np.array([1.0, -damp])
    for start in range(0, n, delay):
        stop = min(start + delay, n)
        block = buf[start:stop]
        smoothed, state = lfilter(b, a, block, zi=state)
        buf[start + delay:stop + delay] = x[start:stop] + feedback * smoothed
        out[start:stop] = block
    return out


def _allpass(x: np.ndarray, delay: int) -> np.ndarray:
    n = x.shape[0]
    out = np.empty(n)
    buf = np.zeros(n + delay)
    for start in range(0, n, delay):
        stop = min(start + delay, n)
        delayed = buf[start:stop]
        out[start:stop] = -x[start:stop] + delayed
        buf[start + delay:stop + delay] = x[start:stop] + _ALLPASS_FEEDBACK * delayed
    return out


def _fx_reverb(data, sample_rate, params):
    scale = sample_rate / 44100.0
    feedback = 0.7 + 0.28 * params["room_size"]
    damp = params["damping"]
    width = params["width"]
    mix = params["mix_ratio"]
    wet = np.empty_like(data)
    for ch in range(2):
        spread = _STEREO_SPREAD if ch == 1 else 0
        inp = data[ch] * _INPUT_GAIN
        acc = np.zeros_like(inp)
        for tuning in _COMB_TUNINGS:
            acc += _comb(inp, int(round((tuning + spread) * scale)), feedback, damp)
        for tuning in _ALLPASS_TUNINGS:
            acc = _allpass(acc, int(round((tuning + spread) * scale)))
        wet[ch] = acc
    wet1 = width / 2.0 + 0.5
    wet2 = (1.0 - width) / 2.0
    mixed = np.vstack([wet[0] * wet1 + wet[1] * wet2,
                       wet[1] * wet1 + wet[0] * wet2])
    return (1.0 - mix) * data + mix * mixed


def _feedback_delay_line(x: np.ndarray, delay: int, feedback: float) -> np.ndarray:
    # y[n] = x[n-D] + feedback*y[n-D]
    n = x.shape[0]
    delayed = np.zeros(n)
    if delay < n:
        delayed[delay:] = x[:n - delay]
    y = np.empty(n)
    for start in range(0, n, delay):
        stop = min(start + delay, n)
        seg = delayed[start:stop].copy()
        if start >= delay:
            seg += feedback * y[start - delay:stop - delay]
        y[start:stop] = seg
    return y


def _fx_delay(data, sample_rate, params):
    mix = params["mix_ratio"]
    delay = int(round(params["delay_seconds"] * sample_rate))
    if delay == 0:
        # Zero delay time collapses the wet path onto the dry signal.
        return data.copy()
    wet = np.vstack([_feedback_delay_line(data[0], delay, params["feedback"]),
                     _feedback_delay_line(data[1], delay, params["feedback"])])
    return (1.0 - mix) * data + mix * wet


EFFECT_RENDERERS = {
    "three_band_equalizer": _fx_three_band_equalizer,
    "compressor": _fx_compressor,
    "stereo_widener": _fx_stereo_widener,
    "gain": _fx_gain,
    "panner": _fx_panner,
    "distortion": _fx_distortion,
    "reverb": _fx_reverb,
    "delay": _fx_delay,
    "limiter": _fx_limiter,
}


def _validate_for_render(chain: FxChain, registry: FxRegistry) -> None:
    report = validate_chain(chain, registry, policy="strict")
    if not report.ok:
        first = report.errors[0]
        raise RenderError(
            f"chain failed strict validation ({len(report.errors)} errors): {first.message}",
            call_index=first.call_index, tool=first.tool,
        )


def render_effect(call: FxCall, input: AudioBuffer, registry: FxRegistry | None = None) -> AudioBuffer:
    """Apply a single validated effect. Pure and deterministic."""
    registry = registry or registry_default()
    _validate_for_render(FxChain((call,)), registry)
    renderer = EFFECT_RENDERERS[call.tool]
    out = renderer(np.asarray(input.data, dtype=np.float64), input.sample_rate, call.arguments)
    return AudioBuffer(input.sample_rate, out)


def render_chain(chain: FxChain, input: AudioBuffer,
                 registry: FxRegistry | None = None) -> tuple[AudioBuffer, RenderTrace]:
    """Apply every call in order, each consuming the previous output.

    The chain must pass strict validation. Output length equals input length.
    A NaN or Inf appearing mid-chain raises a RenderError naming the
    offending effect.
    """
    registry = registry or registry_default()
    _validate_for_render(chain, registry)
    data = np.asarray(input.data, dtype=np.float64)
    sr = input.sample_rate
    entries = []
    for idx, call in enumerate(chain.calls):
        peak_in = float(np.max(np.abs(data))) if data.size else 0.0
        rms_in = float(np.sqrt(np.mean(data ** 2))) if data.size else 0.0
        t0 = time.perf_counter()
        data = EFFECT_RENDERERS[call.tool](data, sr, call.arguments)
        wall = time.perf_counter() - t0
        if not np.all(np.isfinite(data)):
            raise RenderError(
                f"effect {idx} ({call.tool}) produced non-finite samples",
                call_index=idx, tool=call.tool,
            )
        entries.append(TraceEntry(
            tool=call.tool, peak_in=peak_in, rms_in=rms_in,
            peak_out=float(np.max(np.abs(data))) if data.size else 0.0,
            rms_out=float(np.sqrt(np.mean(data ** 2))) if data.size else 0.0,
            wall_s=wall,
        ))
    return AudioBuffer(sr, data), RenderTrace(entries=tuple(entries))
