"""Audio effects chain tooling.

Nine deterministic stereo processors behind a validated parameter registry,
a tool-call wire codec for chat models, stratified corpus synthesis, and the
full evaluation metric suite for scoring predicted chains.
"""

__version__ = "0.1.0"

from .audio import AudioBuffer, read_wav, synth_test_signal, write_wav
from .codec import (
    ToolCallDocument,
    ToolCallError,
    emit_toolcalls,
    load_chain,
    parse_toolcalls,
    save_chain,
)
from .corpus import (
    CorpusManifest,
    PairRecord,
    SamplingConfig,
    build_corpus,
    load_manifest,
    loudness_normalize,
    sample_chain,
)
from .dsp import (
    RenderError,
    RenderTrace,
    biquad_coeffs,
    envelope_follower,
    render_chain,
    render_effect,
)
from .gateway import (
    EndpointConfig,
    GatewayError,
    PromptBundle,
    baseline_predict,
    query_estimator,
    render_prompt,
    replay_estimator,
)
from .metrics import (
    AfVector,
    EvalReport,
    MetricError,
    af_distance,
    af_features,
    cosine_sim,
    effect_accuracy,
    evaluate_pair,
    mrs_distance,
    ntl_was,
    order_spearman,
    param_mae,
)
from .registry import (
    FxCall,
    FxChain,
    FxModuleSchema,
    FxRegistry,
    ParamSchema,
    RegistryError,
    ValidationReport,
    denormalize_param,
    normalize_param,
    quantize_param,
    registry_default,
    registry_fingerprint,
    registry_from_jsonable,
    registry_to_jsonable,
    validate_chain,
)

__all__ = [name for name in dir() if not name.startswith("_")]
