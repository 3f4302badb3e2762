"""Chain sampling and paired-corpus synthesis.

A corpus is a stratified set of (pseudo-dry, reference, chain) triplets: for
each requested chain length, the same number of pairs is synthesized by
loudness-normalizing a dry source, sampling a chain on the regime's parameter
grids, and rendering the reference. Everything is deterministic given the
seed: RNG streams are split per record index, so parallel builds cannot
change the sampled chains.
"""

from __future__ import annotations

import json
import logging
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioBuffer, read_wav, write_wav
from .codec import chain_from_jsonable, chain_to_jsonable
from .dsp import render_chain
from .registry import (
    REGIMES,
    FxCall,
    FxChain,
    FxRegistry,
    _snap,
    registry_default,
    registry_fingerprint,
)

logger = logging.getLogger(__name__)

SILENCE_FLOOR_DBFS = -80.0
PEAK_CEILING_DBFS = -0.1


@dataclass(frozen=True)
class SamplingConfig:
    """Knobs for one corpus build."""

    seed: int
    regime: str = "coarse"
    lengths: tuple[int, ...] = tuple(range(1, 10))
    pairs_per_length: int = 1
    target_rms_dbfs: float = -20.0

    def __post_init__(self) -> None:
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if not self.lengths or any(not 1 <= n <= 9 for n in self.lengths):
            raise ValueError(f"lengths must be within 1..9, got {self.lengths}")
        if self.pairs_per_length < 1:
            raise ValueError("pairs_per_length must be at least 1")
        object.__setattr__(self, "lengths", tuple(int(n) for n in self.lengths))


@dataclass(frozen=True)
class PairRecord:
    """One synthesized triplet; paths are relative to the manifest on disk."""

    record_id: str
    dry_path: str
    ref_path: str
    chain: FxChain
    regime: str
    source_tags: tuple[str, ...] = ()


@dataclass(frozen=True)
class CorpusManifest:
    config: SamplingConfig
    records: tuple[PairRecord, ...]
    registry_fingerprint: str


def sample_chain(rng: np.random.Generator, length: int, regime: str,
                 registry: FxRegistry | None = None) -> FxChain:
    """Draw a random chain: module subset, then ordering, then grid values.

    Draw order is fixed (subset, permutation, then per-call per-parameter
    grid indices in schema order) so a given generator state always produces
    the same chain.
    """
    registry = registry or registry_default()
    pool = len(registry.modules)
    if not 1 <= length <= pool:
        raise ValueError(f"chain length must be in 1..{pool}, got {length}")
    subset = np.sort(rng.choice(pool, size=length, replace=False))
    order = rng.permutation(length)
    calls = []
    for position in order:
        module = registry.modules[int(subset[int(position)])]
        args = {}
        for param in module.params:
            lo, _, step = param.range_for(regime)
            k = int(rng.integers(0, param.grid_size(regime)))
            args[param.name] = _snap(lo + k * step)
        calls.append(FxCall(tool=module.name, arguments=args))
    return FxChain(tuple(calls))


def loudness_normalize(audio: AudioBuffer, target_rms_dbfs: float = -20.0) -> AudioBuffer:
    """Scale uniformly so the combined-channel RMS hits the target.

    If that gain would push the peak past full scale, the gain is reduced to
    peak-normalize at -0.1 dBFS instead (logged). Silent input (RMS below
    -80 dBFS) is an error.
    """
    rms_db = audio.rms_dbfs()
    if rms_db <= SILENCE_FLOOR_DBFS:
        raise ValueError(f"cannot normalize silent audio (RMS {rms_db:.1f} dBFS)")
    gain = 10.0 ** ((target_rms_dbfs - rms_db) / 20.0)
    peak = audio.peak()
    if gain * peak > 1.0:
        gain = 10.0 ** (PEAK_CEILING_DBFS / 20.0) / peak
        logger.warning(
            "loudness target %.1f dBFS would clip (peak %.3f); peak-normalizing to %.1f dBFS",
            target_rms_dbfs, peak, PEAK_CEILING_DBFS,
        )
    return AudioBuffer(audio.sample_rate, audio.data * gain)


def _storage_quantize(buffer: AudioBuffer) -> AudioBuffer:
    # Corpus audio lives on disk as 32-bit float; rendering from the
    # float32-rounded dry makes the stored reference exactly reproducible.
    return AudioBuffer(buffer.sample_rate, buffer.data.astype(np.float32).astype(np.float64))


def _build_record(index: int, length: int, pair_index: int, config: SamplingConfig,
                  seed_seq: np.random.SeedSequence, source_path: Path,
                  out_dir: Path, registry: FxRegistry) -> PairRecord:
    rng = np.random.default_rng(seed_seq)
    source = read_wav(source_path)
    dry = _storage_quantize(loudness_normalize(source, config.target_rms_dbfs))
    chain = sample_chain(rng, length, config.regime, registry)
    reference, _ = render_chain(chain, dry, registry)
    record_id = f"{config.regime}-len{length}-{pair_index:03d}"
    dry_rel = f"dry/{record_id}.wav"
    ref_rel = f"ref/{record_id}.wav"
    write_wav(out_dir / dry_rel, dry, fmt="float32")
    write_wav(out_dir / ref_rel, reference, fmt="float32")
    return PairRecord(
        record_id=record_id,
        dry_path=dry_rel,
        ref_path=ref_rel,
        chain=chain,
        regime=config.regime,
        source_tags=(source_path.stem,),
    )


def build_corpus(config: SamplingConfig, dry_sources, out_dir,
                 registry: FxRegistry | None = None, jobs: int = 1) -> CorpusManifest:
    """Synthesize the full stratified corpus under out_dir.

    Writes dry/ and ref/ WAV trees plus manifest.json and returns the loaded
    manifest (record paths resolved to absolute). A failed build removes any
    partially written files.
    """
    registry = registry or registry_default()
    sources = [Path(p) for p in dry_sources]
    if not sources:
        raise ValueError("at least one dry source is required")
    for path in sources:
        if not path.is_file():
            raise ValueError(f"unreadable dry source: {path}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "dry").mkdir(exist_ok=True)
    (out_dir / "ref").mkdir(exist_ok=True)

    tasks = []
    for length in config.lengths:
        for pair_index in range(config.pairs_per_length):
            tasks.append((len(tasks), length, pair_index))
    seeds = np.random.SeedSequence(config.seed).spawn(len(tasks))

    def run(task):
        index, length, pair_index = task
        return _build_record(index, length, pair_index, config, seeds[index],
                             sources[index % len(sources)], out_dir, registry)

    try:
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                records = tuple(pool.map(run, tasks))
        else:
            records = tuple(run(task) for task in tasks)
        manifest = CorpusManifest(
            config=config,
            records=records,
            registry_fingerprint=registry_fingerprint(registry),
        )
        save_manifest(out_dir / "manifest.json", manifest)
    except Exception:
        shutil.rmtree(out_dir / "dry", ignore_errors=True)
        shutil.rmtree(out_dir / "ref", ignore_errors=True)
        (out_dir / "manifest.json").unlink(missing_ok=True)
        raise
    return load_manifest(out_dir / "manifest.json")


def manifest_to_jsonable(manifest: CorpusManifest) -> dict:
    return {
        "config": {
            "seed": manifest.config.seed,
            "regime": manifest.config.regime,
            "lengths": list(manifest.config.lengths),
            "pairs_per_length": manifest.config.pairs_per_length,
            "target_rms_dbfs": manifest.config.target_rms_dbfs,
        },
        "registry_fingerprint": manifest.registry_fingerprint,
        "records": [
            {
                "id": r.record_id,
                "dry_path": r.dry_path,
                "ref_path": r.ref_path,
                "regime": r.regime,
                "source_tags": list(r.source_tags),
                "chain": chain_to_jsonable(r.chain),
            }
            for r in manifest.records
        ],
    }


def manifest_from_jsonable(doc: dict) -> CorpusManifest:
    config = SamplingConfig(
        seed=int(doc["config"]["seed"]),
        regime=doc["config"]["regime"],
        lengths=tuple(doc["config"]["lengths"]),
        pairs_per_length=int(doc["config"]["pairs_per_length"]),
        target_rms_dbfs=float(doc["config"]["target_rms_dbfs"]),
    )
    records = tuple(
        PairRecord(
            record_id=r["id"],
            dry_path=r["dry_path"],
            ref_path=r["ref_path"],
            chain=chain_from_jsonable(r["chain"]),
            regime=r["regime"],
            source_tags=tuple(r["source_tags"]),
        )
        for r in doc["records"]
    )
    return CorpusManifest(
        config=config,
        records=records,
        registry_fingerprint=doc["registry_fingerprint"],
    )


def save_manifest(path, manifest: CorpusManifest) -> None:
    Path(path).write_text(json.dumps(manifest_to_jsonable(manifest), indent=2) + "\n")


def load_manifest(path) -> CorpusManifest:
    """Load a manifest, resolving record paths against its directory."""
    path = Path(path)
    if not path.is_file():
        raise ValueError(f"no such manifest: {path}")
    manifest = manifest_from_jsonable(json.loads(path.read_text()))
    base = path.resolve().parent
    records = tuple(
        PairRecord(
            record_id=r.record_id,
            dry_path=str(base / r.dry_path),
            ref_path=str(base / r.ref_path),
            chain=r.chain,
            regime=r.regime,
            source_tags=r.source_tags,
        )
        for r in manifest.records
    )
    return CorpusManifest(manifest.config, records, manifest.registry_fingerprint)
