from __future__ import annotations

import pytest

from fxchain.audio import synth_test_signal, write_wav
from fxchain.corpus import SamplingConfig, build_corpus
from fxchain.registry import registry_default


@pytest.fixture(scope="session")
def registry():
    return registry_default()


@pytest.fixture(scope="session")
def pink_noise():
    return synth_test_signal("pink_noise", 1.0, 44100)


@pytest.fixture(scope="session")
def source_dir(tmp_path_factory):
    """Three short deterministic dry sources on disk."""
    root = tmp_path_factory.mktemp("sources")
    for kind in ("sine", "sweep", "pink_noise"):
        write_wav(root / f"{kind}.wav", synth_test_signal(kind, 2.0, 44100), fmt="float32")
    return root


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory, source_dir, registry):
    """A 6-record fine-regime corpus used by metric and gateway tests."""
    out = tmp_path_factory.mktemp("small-corpus")
    config = SamplingConfig(seed=7777, regime="fine", lengths=(1, 2, 3),
                            pairs_per_length=2)
    return build_corpus(config, sorted(source_dir.glob("*.wav")), out, registry)
