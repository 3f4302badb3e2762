"""Stereo audio buffers, WAV file I/O, and deterministic test signals."""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import chirp, lfilter

SUPPORTED_RATES = (44100, 48000)
WAV_FORMATS = ("float32", "pcm16", "pcm24")

# Fixed seed so generated test signals are identical across runs.
_SIGNAL_SEED = 0x5EED


class AudioIOError(ValueError):
    """Unreadable, unsupported, or out-of-contract audio file."""


@dataclass(frozen=True)
class AudioBuffer:
    """Stereo signal: float64 samples of shape (2, n) plus a sample rate.

    Nominal amplitude range is [-1, 1]; excursions are permitted in memory
    and only matter at the integer-PCM write boundary.
    """

    sample_rate: int
    data: np.ndarray

    def __post_init__(self) -> None:
        # Contiguous layout keeps numpy reductions bitwise-reproducible no
        # matter whether the data arrived as a file transpose or a render.
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != 2:
            raise AudioIOError(f"expected stereo data of shape (2, n), got {arr.shape}")
        if int(self.sample_rate) <= 0:
            raise AudioIOError(f"non-positive sample rate {self.sample_rate}")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))
        object.__setattr__(self, "data", arr)

    @property
    def num_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.num_samples / self.sample_rate

    def peak(self) -> float:
        return float(np.max(np.abs(self.data))) if self.num_samples else 0.0

    def rms(self) -> float:
        """RMS over both channels combined."""
        if self.num_samples == 0:
            return 0.0
        return float(np.sqrt(np.mean(self.data ** 2)))

    def rms_dbfs(self) -> float:
        rms = self.rms()
        return 20.0 * float(np.log10(rms)) if rms > 0 else float("-inf")

    @classmethod
    def stereo(cls, left, right, sample_rate: int) -> "AudioBuffer":
        return cls(sample_rate, np.vstack([left, right]))

    @classmethod
    def from_mono(cls, samples, sample_rate: int) -> "AudioBuffer":
        x = np.asarray(samples, dtype=np.float64)
        return cls(sample_rate, np.vstack([x, x]))


def read_wav(path) -> AudioBuffer:
    """Read a 44.1/48 kHz WAV file (PCM 16/24-bit or IEEE float 32-bit).

    Mono files are duplicated to stereo with a warning; more than two
    channels is an error.
    """
    path = Path(path)
    if not path.is_file():
        raise AudioIOError(f"no such audio file: {path}")
    try:
        rate, raw = wavfile.read(path)
    except Exception as exc:
        raise AudioIOError(f"cannot read WAV {path}: {exc}") from exc
    if rate not in SUPPORTED_RATES:
        raise AudioIOError(f"{path}: unsupported sample rate {rate} (need 44100 or 48000)")
    if raw.dtype == np.int16:
        data = raw.astype(np.float64) / 2 ** 15
    elif raw.dtype == np.int32:
        # scipy stores 24-bit PCM payloads in the top bytes of int32, so one
        # scale factor covers both 24- and 32-bit integer data.
        data = raw.astype(np.float64) / 2 ** 31
    elif raw.dtype in (np.float32, np.float64):
        data = raw.astype(np.float64)
    else:
        raise AudioIOError(f"{path}: unsupported sample format {raw.dtype}")
    if data.ndim == 1:
        warnings.warn(f"{path}: mono file duplicated to stereo")
        return AudioBuffer.from_mono(data, rate)
    if data.shape[1] == 1:
        warnings.warn(f"{path}: mono file duplicated to stereo")
        return AudioBuffer.from_mono(data[:, 0], rate)
    if data.shape[1] != 2:
        raise AudioIOError(f"{path}: expected 1 or 2 channels, got {data.shape[1]}")
    return AudioBuffer(rate, data.T)


def write_wav(path, buffer: AudioBuffer, fmt: str = "float32") -> None:
    """Write a stereo WAV file in one of float32, pcm16, or pcm24."""
    if fmt not in WAV_FORMATS:
        raise AudioIOError(f"unknown WAV format {fmt!r}")
    if buffer.sample_rate not in SUPPORTED_RATES:
        raise AudioIOError(f"unsupported sample rate {buffer.sample_rate} (need 44100 or 48000)")
    path = Path(path)
    frames = buffer.data.T
    if fmt == "float32":
        wavfile.write(path, buffer.sample_rate, frames.astype(np.float32))
    elif fmt == "pcm16":
        scaled = np.clip(np.round(frames * 32767.0), -32768, 32767).astype(np.int16)
        wavfile.write(path, buffer.sample_rate, scaled)
    else:
        _write_pcm24(path, buffer.sample_rate, frames)


def _write_pcm24(path: Path, rate: int, frames: np.ndarray) -> None:
    # scipy cannot write 24-bit PCM; assemble the RIFF chunks directly.
    ints = np.clip(np.round(frames * 8388607.0), -8388608, 8388607).astype(np.int32)
    flat = ints.reshape(-1)
    le32 = flat.astype("<i4").tobytes()
    payload = bytearray(len(flat) * 3)
    for byte in range(3):
        payload[byte::3] = le32[byte::4]
    channels = frames.shape[1]
    block_align = channels * 3
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, channels, rate,
                                    rate * block_align, block_align, 24)
    header += b"data" + struct.pack("<I", len(payload))
    path.write_bytes(header + bytes(payload))


def _pink_noise(rng: np.random.Generator, n: int) -> np.ndarray:
    """White noise through a parallel one-pole bank approximating -3 dB/oct."""
    white = rng.standard_normal(n)
    branches = (
        (0.0555179, 0.99886),
        (0.0750759, 0.99332),
        (0.1538520, 0.96900),
        (0.3104856, 0.86650),
        (0.5329522, 0.55000),
        (-0.0168980, -0.76160),
    )
    pink = np.zeros(n)
    for gain, pole in branches:
        pink += lfilter([gain], [1.0, -pole], white)
    pink[1:] += 0.115926 * white[:-1]
    pink += 0.5362 * white
    return pink


def synth_test_signal(kind: str, duration_s: float, sample_rate: int = 44100) -> AudioBuffer:
    """Deterministic desk-scale test signals: sine, sweep, pink_noise, impulse.

    sine and sweep are identical in both channels; pink_noise has independent
    channels normalized to -20 dBFS combined RMS; impulse is a single unit
    sample at t=0.
    """
    if duration_s <= 0:
        raise ValueError(f"duration must be positive, got {duration_s}")
    n = int(round(duration_s * sample_rate))
    if kind == "sine":
        t = np.arange(n) / sample_rate
        mono = 0.9 * np.sin(2 * np.pi * 440.0 * t)
        return AudioBuffer.from_mono(mono, sample_rate)
    if kind == "sweep":
        t = np.arange(n) / sample_rate
        mono = 0.9 * chirp(t, f0=20.0, f1=min(20000.0, 0.45 * sample_rate),
                           t1=duration_s, method="logarithmic")
        return AudioBuffer.from_mono(mono, sample_rate)
    if kind == "impulse":
        mono = np.zeros(n)
        mono[0] = 1.0
        return AudioBuffer.from_mono(mono, sample_rate)
    if kind == "pink_noise":
        rng = np.random.default_rng(_SIGNAL_SEED)
        data = np.vstack([_pink_noise(rng, n), _pink_noise(rng, n)])
        rms = np.sqrt(np.mean(data ** 2))
        data *= 10 ** (-20.0 / 20.0) / rms
        return AudioBuffer(sample_rate, data)
    raise ValueError(f"unknown test signal kind {kind!r}")
