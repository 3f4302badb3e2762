"""Evaluation metrics: chain planning, spectral distance, and audio features.

Planning metrics (presence accuracy, order correlation, normalized parameter
MAE) compare a predicted chain against the ground truth. Perceptual distance
is a multi-resolution STFT loss over L/R or M/S channel pairs. Feature
distance compares compact DSP descriptors. All functions are pure, so batch
evaluation can run records in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal, stats

from .audio import AudioBuffer, read_wav
from .corpus import PairRecord
from .dsp import render_chain
from .registry import FxChain, FxRegistry, normalize_param, registry_default

# (fft size, hop, window length) per resolution; Hann windows throughout.
MRS_RESOLUTIONS = ((512, 128, 512), (1024, 256, 1024), (2048, 512, 2048))

# Magnitudes are floored here before the log so silence-adjacent bins keep
# the log-magnitude term finite.
LOG_MAG_FLOOR = 1e-7

# Rank assigned to a module absent from a chain: pool size + 1.
MISSING_RANK = 10

_BARK_BANDS = 24
_WELCH_NPERSEG = 4096
_ENERGY_FLOOR = 1e-12


class MetricError(ValueError):
    """Inputs outside a metric's domain (silence, length mismatch, ...)."""


@dataclass(frozen=True)
class AfVector:
    """Compact DSP descriptor: dynamics, spatialization, and spectrum."""

    rms_dbfs: float
    crest_factor_db: float
    stereo_width: float
    stereo_imbalance: float
    bark_spectrum_db: tuple[float, ...]


@dataclass(frozen=True)
class EvalReport:
    """All metric outputs for one predicted chain against one record.

    order_correlation is None when either rank vector is constant (an empty
    chain); param_mae is None when the chains share no modules. Both are
    excluded from aggregates, with counts, rather than coerced to 0.
    """

    effect_accuracy: float
    order_correlation: float | None
    param_mae: float | None
    mrs_lr: float
    mrs_ms: float
    af_distance: float
    cosine_sims: dict

    def to_jsonable(self) -> dict:
        return {
            "effect_accuracy": self.effect_accuracy,
            "order_correlation": self.order_correlation,
            "param_mae": self.param_mae,
            "mrs_lr": self.mrs_lr,
            "mrs_ms": self.mrs_ms,
            "af_distance": self.af_distance,
            "cosine_sims": dict(self.cosine_sims),
        }


def effect_accuracy(pred: FxChain, gt: FxChain, registry: FxRegistry | None = None) -> float:
    """Fraction of the nine pool modules whose presence matches."""
    registry = registry or registry_default()
    pred_tools = set(pred.tools)
    gt_tools = set(gt.tools)
    names = registry.module_names
    matches = sum((name in pred_tools) == (name in gt_tools) for name in names)
    return matches / len(names)


def _rank_vector(chain: FxChain, names: tuple[str, ...]) -> np.ndarray:
    position = {tool: i + 1 for i, tool in enumerate(chain.tools)}
    return np.array([position.get(name, MISSING_RANK) for name in names], dtype=np.float64)


def order_spearman(pred: FxChain, gt: FxChain, registry: FxRegistry | None = None) -> float | None:
    """Tie-aware Spearman correlation of module positions over the pool.

    Absent modules all take rank 10. Returns None when either vector is
    constant (only possible for an empty chain), where the correlation is
    undefined.
    """
    registry = registry or registry_default()
    a = _rank_vector(pred, registry.module_names)
    b = _rank_vector(gt, registry.module_names)
    if np.all(a == a[0]) or np.all(b == b[0]):
        return None
    return float(stats.spearmanr(a, b).statistic)


def param_mae(pred: FxChain, gt: FxChain, registry: FxRegistry | None = None) -> float | None:
    """Mean absolute error of coarse-normalized parameters over shared modules.

    Only modules present in both chains contribute; None when there are no
    shared modules.
    """
    registry = registry or registry_default()
    pred_by_tool = {c.tool: c.arguments for c in pred.calls}
    gt_by_tool = {c.tool: c.arguments for c in gt.calls}
    diffs = []
    # Canonical module order keeps the accumulation bit-symmetric in pred/gt.
    for tool in registry.module_names:
        if tool not in pred_by_tool or tool not in gt_by_tool:
            continue
        for param in registry.module(tool).param_names:
            p = normalize_param(tool, param, float(pred_by_tool[tool][param]), registry)
            g = normalize_param(tool, param, float(gt_by_tool[tool][param]), registry)
            diffs.append(abs(p - g))
    if not diffs:
        return None
    return float(np.mean(diffs))


def stft_magnitudes(x: np.ndarray, fft_size: int, hop: int, win: int) -> np.ndarray:
    """Magnitude STFT with centered zero-padding so every sample is covered."""
    x = np.asarray(x, dtype=np.float64)
    window = signal.get_window("hann", win, fftbins=True)
    pad = win // 2
    padded = np.concatenate([np.zeros(pad), x, np.zeros(pad)])
    frames = 1 + (padded.shape[0] - win) // hop
    idx = np.arange(win)[None, :] + hop * np.arange(frames)[:, None]
    return np.abs(np.fft.rfft(padded[idx] * window, n=fft_size, axis=1))


def stft_loss_terms(ref: np.ndarray, est: np.ndarray,
                    resolutions=MRS_RESOLUTIONS) -> list[tuple[float, float]]:
    """Per-resolution (spectral convergence, log-magnitude L1) for one channel.

    Spectral convergence normalizes by the reference spectrum, so the
    reference channel must not be all-zero.
    """
    ref = np.asarray(ref, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if ref.shape != est.shape:
        raise MetricError(f"length mismatch: {ref.shape} vs {est.shape}")
    terms = []
    for fft_size, hop, win in resolutions:
        mag_ref = stft_magnitudes(ref, fft_size, hop, win)
        mag_est = stft_magnitudes(est, fft_size, hop, win)
        denom = float(np.linalg.norm(mag_ref))
        if denom == 0.0:
            raise MetricError("all-zero reference: spectral convergence is undefined")
        l_sc = float(np.linalg.norm(mag_ref - mag_est)) / denom
        l_mag = float(np.mean(np.abs(
            np.log(np.maximum(mag_ref, LOG_MAG_FLOOR))
            - np.log(np.maximum(mag_est, LOG_MAG_FLOOR))
        )))
        terms.append((l_sc, l_mag))
    return terms


def mrs_distance(ref: AudioBuffer, est: AudioBuffer, channel_mode: str = "lr") -> float:
    """Multi-resolution STFT distance averaged over a stereo channel pair.

    lr compares left/right directly; ms compares mid = (L+R)/2 and
    side = (L-R)/2. An all-zero side channel in the reference is skipped
    (mono reference material has no spatial content to compare); an all-zero
    reference channel is otherwise an error.
    """
    if channel_mode not in ("lr", "ms"):
        raise MetricError(f"unknown channel mode {channel_mode!r}")
    if ref.num_samples != est.num_samples:
        raise MetricError(f"length mismatch: {ref.num_samples} vs {est.num_samples}")
    if ref.sample_rate != est.sample_rate:
        raise MetricError(f"sample-rate mismatch: {ref.sample_rate} vs {est.sample_rate}")
    if channel_mode == "lr":
        pairs = [(ref.data[0], est.data[0], False), (ref.data[1], est.data[1], False)]
    else:
        pairs = [
            (0.5 * (ref.data[0] + ref.data[1]), 0.5 * (est.data[0] + est.data[1]), False),
            (0.5 * (ref.data[0] - ref.data[1]), 0.5 * (est.data[0] - est.data[1]), True),
        ]
    totals = []
    for ref_ch, est_ch, skippable in pairs:
        if skippable and not np.any(ref_ch):
            continue
        terms = stft_loss_terms(ref_ch, est_ch)
        totals.append(sum(l_sc + l_mag for l_sc, l_mag in terms))
    return float(np.mean(totals))


def _bark_band_edges() -> np.ndarray:
    # Traunmueller's analytic critical-band rate, inverted at integer Bark
    # values; the bottom band is extended to DC and the top band absorbs
    # everything above the 24th edge.
    z = np.arange(_BARK_BANDS + 1, dtype=np.float64)
    edges = 1960.0 * (z + 0.53) / (26.28 - z)
    edges[0] = 0.0
    return edges


def af_features(audio: AudioBuffer) -> AfVector:
    """Extract the DSP feature descriptor. Digital silence is an error."""
    data = audio.data
    rms = audio.rms()
    if rms == 0.0:
        raise MetricError("cannot extract features from digital silence")
    peak = audio.peak()
    mid = 0.5 * (data[0] + data[1])
    side = 0.5 * (data[0] - data[1])
    rms_mid = float(np.sqrt(np.mean(mid ** 2)))
    rms_side = float(np.sqrt(np.mean(side ** 2)))
    energy_l = float(np.sum(data[0] ** 2))
    energy_r = float(np.sum(data[1] ** 2))

    nperseg = min(_WELCH_NPERSEG, audio.num_samples)
    freqs, psd_l = signal.welch(data[0], fs=audio.sample_rate, window="hann",
                                nperseg=nperseg, detrend=False, scaling="spectrum")
    _, psd_r = signal.welch(data[1], fs=audio.sample_rate, window="hann",
                            nperseg=nperseg, detrend=False, scaling="spectrum")
    psd = 0.5 * (psd_l + psd_r)
    edges = _bark_band_edges()
    bands = np.clip(np.searchsorted(edges, freqs, side="right") - 1, 0, _BARK_BANDS - 1)
    energies = np.zeros(_BARK_BANDS)
    np.add.at(energies, bands, psd)
    bark_db = 10.0 * np.log10(energies + _ENERGY_FLOOR)

    return AfVector(
        rms_dbfs=20.0 * float(np.log10(rms)),
        crest_factor_db=20.0 * float(np.log10(peak / rms)),
        stereo_width=rms_side / max(rms_mid, LOG_MAG_FLOOR),
        stereo_imbalance=(energy_r - energy_l) / (energy_r + energy_l),
        bark_spectrum_db=tuple(float(v) for v in bark_db),
    )


def af_distance(a: AfVector, b: AfVector) -> float:
    """Scalar distance between feature vectors.

    The two unitless stereo features are scaled by 10 to sit on a dB-like
    scale comparable with the other components.
    """
    bark_a = np.asarray(a.bark_spectrum_db)
    bark_b = np.asarray(b.bark_spectrum_db)
    if bark_a.shape != bark_b.shape:
        raise MetricError("bark spectra have different lengths")
    components = (
        abs(a.rms_dbfs - b.rms_dbfs),
        abs(a.crest_factor_db - b.crest_factor_db),
        10.0 * abs(a.stereo_width - b.stereo_width),
        10.0 * abs(a.stereo_imbalance - b.stereo_imbalance),
        float(np.mean(np.abs(bark_a - bark_b))),
    )
    return float(np.mean(components))


def cosine_sim(e1, e2) -> float:
    """Standard cosine similarity between two embedding vectors."""
    v1 = np.asarray(e1, dtype=np.float64).ravel()
    v2 = np.asarray(e2, dtype=np.float64).ravel()
    if v1.shape != v2.shape:
        raise MetricError(f"embedding dimension mismatch: {v1.shape} vs {v2.shape}")
    n1 = float(np.linalg.norm(v1))
    n2 = float(np.linalg.norm(v2))
    if n1 == 0.0 or n2 == 0.0:
        raise MetricError("cannot take cosine similarity with a zero-norm vector")
    return float(np.dot(v1, v2) / (n1 * n2))


def ntl_was(prob_rows, token_values, truths) -> float:
    """Wasserstein-1 number-token loss.

    Mean over rows of sum_v P(v) * |truth - val(v)|, where each row is a
    probability distribution over the numeric-token vocabulary.
    """
    values = np.asarray(token_values, dtype=np.float64)
    rows = [np.asarray(row, dtype=np.float64) for row in prob_rows]
    if not rows:
        raise MetricError("at least one probability row is required")
    truths = [float(t) for t in truths]
    if len(rows) != len(truths):
        raise MetricError(f"{len(rows)} rows but {len(truths)} truths")
    row_losses = []
    for index, (row, truth) in enumerate(zip(rows, truths)):
        if row.shape != values.shape:
            raise MetricError(f"row {index} has {row.shape} probabilities for {values.shape} tokens")
        if abs(float(row.sum()) - 1.0) > 1e-6:
            raise MetricError(f"row {index} is not normalized (sum {row.sum()!r})")
        # Correctly-rounded summation: probability-weighted distances often
        # carry decimal fractions whose naive sum drifts by an ulp.
        row_losses.append(math.fsum((row * np.abs(truth - values)).tolist()))
    return math.fsum(row_losses) / len(rows)


def _load_float32(path: str) -> AudioBuffer:
    loaded = read_wav(path)
    return AudioBuffer(loaded.sample_rate, loaded.data.astype(np.float32).astype(np.float64))


def evaluate_pair(pred: FxChain, record: PairRecord, registry: FxRegistry | None = None,
                  embeddings: dict | None = None) -> EvalReport:
    """Render a predicted chain on a record's pseudo-dry and score everything.

    Audio comparisons happen at 32-bit float precision, matching the on-disk
    corpus format, so re-rendering a record's own chain scores exactly zero.
    cosine_sims is filled only when embeddings are supplied, as a mapping
    name -> (reference vector, estimate vector).
    """
    registry = registry or registry_default()
    dry = _load_float32(record.dry_path)
    ref = _load_float32(record.ref_path)
    rendered, _ = render_chain(pred, dry, registry)
    rendered = AudioBuffer(rendered.sample_rate, rendered.data.astype(np.float32).astype(np.float64))
    sims = {}
    if embeddings:
        sims = {name: cosine_sim(pair[0], pair[1]) for name, pair in embeddings.items()}
    return EvalReport(
        effect_accuracy=effect_accuracy(pred, record.chain, registry),
        order_correlation=order_spearman(pred, record.chain, registry),
        param_mae=param_mae(pred, record.chain, registry),
        mrs_lr=mrs_distance(ref, rendered, "lr"),
        mrs_ms=mrs_distance(ref, rendered, "ms"),
        af_distance=af_distance(af_features(ref), af_features(rendered)),
        cosine_sims=sims,
    )
