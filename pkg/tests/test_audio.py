from __future__ import annotations

import numpy as np
import pytest

from fxchain.audio import (
    AudioBuffer,
    AudioIOError,
    read_wav,
    synth_test_signal,
    write_wav,
)


def test_buffer_validation():
    with pytest.raises(AudioIOError):
        AudioBuffer(44100, np.zeros(100))
    with pytest.raises(AudioIOError):
        AudioBuffer(44100, np.zeros((3, 100)))
    with pytest.raises(AudioIOError):
        AudioBuffer(0, np.zeros((2, 100)))
    buf = AudioBuffer(44100, np.zeros((2, 441)))
    assert buf.num_samples == 441
    assert buf.duration_s == 0.01


def test_float32_round_trip_is_exact(tmp_path, pink_noise):
    path = tmp_path / "x.wav"
    write_wav(path, pink_noise, fmt="float32")
    loaded = read_wav(path)
    assert loaded.sample_rate == 44100
    stored = pink_noise.data.astype(np.float32).astype(np.float64)
    assert np.array_equal(loaded.data, stored)


def test_pcm16_round_trip(tmp_path, pink_noise):
    path = tmp_path / "x16.wav"
    write_wav(path, pink_noise, fmt="pcm16")
    loaded = read_wav(path)
    assert np.max(np.abs(loaded.data - pink_noise.data)) < 2.0 / 32767


def test_pcm24_round_trip(tmp_path, pink_noise):
    path = tmp_path / "x24.wav"
    write_wav(path, pink_noise, fmt="pcm24")
    loaded = read_wav(path)
    assert np.max(np.abs(loaded.data - pink_noise.data)) < 2.0 / 8388607


def test_mono_is_duplicated_with_warning(tmp_path):
    from scipy.io import wavfile
    mono = (np.sin(np.linspace(0, 100, 4410)) * 0.5).astype(np.float32)
    path = tmp_path / "mono.wav"
    wavfile.write(path, 44100, mono)
    with pytest.warns(UserWarning, match="mono"):
        loaded = read_wav(path)
    assert loaded.data.shape[0] == 2
    assert np.array_equal(loaded.data[0], loaded.data[1])


def test_unsupported_rate_rejected(tmp_path):
    from scipy.io import wavfile
    path = tmp_path / "odd.wav"
    wavfile.write(path, 22050, np.zeros((100, 2), dtype=np.float32))
    with pytest.raises(AudioIOError, match="22050"):
        read_wav(path)
    with pytest.raises(AudioIOError):
        write_wav(path, AudioBuffer(22050, np.zeros((2, 10))))


def test_missing_file(tmp_path):
    with pytest.raises(AudioIOError, match="nothing.wav"):
        read_wav(tmp_path / "nothing.wav")


def test_sine_signal():
    buf = synth_test_signal("sine", 1.0, 44100)
    assert buf.num_samples == 44100
    assert abs(buf.peak() - 0.9) < 1e-3
    assert np.array_equal(buf.data[0], buf.data[1])


def test_impulse_signal():
    buf = synth_test_signal("impulse", 0.5, 48000)
    assert buf.data[0][0] == 1.0
    assert np.count_nonzero(buf.data) == 2  # one unit sample per channel


def test_pink_noise_level_and_determinism():
    a = synth_test_signal("pink_noise", 1.0, 44100)
    b = synth_test_signal("pink_noise", 1.0, 44100)
    assert np.array_equal(a.data, b.data)
    assert -26.0 <= a.rms_dbfs() <= -14.0
    assert not np.array_equal(a.data[0], a.data[1])  # independent channels


def test_sweep_signal_is_finite():
    buf = synth_test_signal("sweep", 0.5, 48000)
    assert np.all(np.isfinite(buf.data))
    assert abs(buf.peak() - 0.9) < 1e-2


def test_bad_signal_requests():
    with pytest.raises(ValueError):
        synth_test_signal("square", 1.0)
    with pytest.raises(ValueError):
        synth_test_signal("sine", 0.0)
