"""Catalog of the nine effect modules and their 26 parameter grids.

The registry is the single source of truth for parameter ranges, step sizes,
units, and canonical ordering. Validation, normalization, quantization, and
sampling all derive from it. Two sampling regimes exist per parameter: a wide
"coarse" grid covering the whole operating space and a narrower "fine" grid
reflecting production-realistic settings. The fine range is always contained
in the coarse range; validation is against the coarse range.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

UNITS = ("dB", "Hz", "ms", "seconds", "ratio", "unitless")
REGIMES = ("coarse", "fine")
POLICIES = ("strict", "clamp")

# Range grids are decimal-valued; snapping keeps sampled/quantized values on
# clean decimals so the wire codec round-trips them bit-exactly.
_SNAP_DECIMALS = 9


class RegistryError(ValueError):
    """Unknown module/parameter or a value outside its declared range."""


def _snap(value: float) -> float:
    return float(round(value, _SNAP_DECIMALS))


@dataclass(frozen=True)
class ParamSchema:
    """One effect parameter: unit plus coarse and fine grids (min, max, step)."""

    name: str
    unit: str
    coarse_min: float
    coarse_max: float
    coarse_step: float
    fine_min: float
    fine_max: float
    fine_step: float

    def __post_init__(self) -> None:
        if self.unit not in UNITS:
            raise RegistryError(f"unknown unit {self.unit!r} for parameter {self.name!r}")
        if self.coarse_step <= 0 or self.fine_step <= 0:
            raise RegistryError(f"non-positive step for parameter {self.name!r}")
        if not (self.coarse_min <= self.fine_min <= self.fine_max <= self.coarse_max):
            raise RegistryError(f"fine range escapes coarse range for parameter {self.name!r}")

    def range_for(self, regime: str) -> tuple[float, float, float]:
        if regime == "coarse":
            return self.coarse_min, self.coarse_max, self.coarse_step
        if regime == "fine":
            return self.fine_min, self.fine_max, self.fine_step
        raise RegistryError(f"unknown regime {regime!r}")

    def grid_size(self, regime: str) -> int:
        # Largest k with min + k*step <= max; the max itself is not guaranteed
        # to sit on the grid (a few table rows have a non-integral span/step).
        lo, hi, step = self.range_for(regime)
        return int(math.floor((hi - lo) / step + 1e-9)) + 1

    def grid_values(self, regime: str) -> list[float]:
        lo, _, step = self.range_for(regime)
        return [_snap(lo + k * step) for k in range(self.grid_size(regime))]


@dataclass(frozen=True)
class FxModuleSchema:
    """One effect module: canonical name plus its ordered parameter list."""

    name: str
    params: tuple[ParamSchema, ...]

    def __post_init__(self) -> None:
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise RegistryError(f"duplicate parameter names in module {self.name!r}")

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    def param(self, name: str) -> ParamSchema:
        for p in self.params:
            if p.name == name:
                return p
        raise RegistryError(f"module {self.name!r} has no parameter {name!r}")


@dataclass(frozen=True)
class FxRegistry:
    """Ordered collection of effect module schemas."""

    modules: tuple[FxModuleSchema, ...]

    def __post_init__(self) -> None:
        names = [m.name for m in self.modules]
        if len(set(names)) != len(names):
            raise RegistryError("duplicate module names in registry")

    @property
    def module_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.modules)

    @property
    def total_params(self) -> int:
        return sum(len(m.params) for m in self.modules)

    def __contains__(self, name: str) -> bool:
        return name in self.module_names

    def module(self, name: str) -> FxModuleSchema:
        for m in self.modules:
            if m.name == name:
                return m
        raise RegistryError(f"unknown module {name!r}")


@dataclass(frozen=True)
class FxCall:
    """One tool invocation: module name plus an argument map."""

    tool: str
    arguments: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FxChain:
    """Ordered sequence of tool calls. Empty means "apply no effects"."""

    calls: tuple[FxCall, ...] = ()

    def __len__(self) -> int:
        return len(self.calls)

    def __iter__(self):
        return iter(self.calls)

    @property
    def tools(self) -> tuple[str, ...]:
        return tuple(c.tool for c in self.calls)


# (name, unit, coarse (min, max, step), fine (min, max, step)) per parameter.
_TABLE: tuple[tuple[str, tuple], ...] = (
    ("three_band_equalizer", (
        ("low_gain_db", "dB", (-20.0, 20.0, 2.0), (-6.0, 6.0, 1.0)),
        ("low_cutoff_freq", "Hz", (0.0, 400.0, 20.0), (60.0, 120.0, 10.0)),
        ("low_q_factor", "unitless", (0.0, 6.0, 0.5), (0.5, 3.0, 0.25)),
        ("mid_gain_db", "dB", (-20.0, 20.0, 2.0), (-6.0, 6.0, 1.0)),
        ("mid_cutoff_freq", "Hz", (250.0, 6000.0, 250.0), (250.0, 1000.0, 100.0)),
        ("mid_q_factor", "unitless", (0.1, 6.0, 0.5), (0.5, 3.0, 0.25)),
        ("high_gain_db", "dB", (-20.0, 20.0, 2.0), (-6.0, 6.0, 1.0)),
        ("high_cutoff_freq", "Hz", (4000.0, 20000.0, 1000.0), (4000.0, 8000.0, 500.0)),
        ("high_q_factor", "unitless", (0.0, 6.0, 0.5), (0.5, 3.0, 0.5)),
    )),
    ("compressor", (
        ("threshold_db", "dB", (-40.0, -5.0, 5.0), (-20.0, -10.0, 1.0)),
        ("ratio", "ratio", (0.0, 20.0, 1.0), (2.0, 8.0, 0.5)),
        ("attack_ms", "ms", (0.0, 500.0, 5.0), (1.0, 30.0, 1.0)),
        ("release_ms", "ms", (0.0, 1000.0, 50.0), (0.0, 500.0, 25.0)),
    )),
    ("stereo_widener", (
        ("width", "unitless", (0.0, 1.5, 0.1), (1.1, 1.5, 0.1)),
    )),
    ("gain", (
        ("gain_db", "dB", (-20.0, 20.0, 2.0), (-6.0, 6.0, 1.0)),
    )),
    ("panner", (
        ("pan", "unitless", (-1.0, 1.0, 0.1), (-0.6, 0.6, 0.1)),
    )),
    ("distortion", (
        ("drive_db", "dB", (0.0, 20.0, 2.0), (1.0, 5.0, 0.5)),
    )),
    ("reverb", (
        ("room_size", "unitless", (0.0, 0.9, 0.1), (0.3, 0.6, 0.05)),
        ("damping", "unitless", (0.0, 0.9, 0.1), (0.3, 0.6, 0.05)),
        ("width", "unitless", (0.0, 0.9, 0.1), (0.3, 0.6, 0.05)),
        ("mix_ratio", "ratio", (0.0, 1.0, 0.1), (0.1, 1.0, 0.1)),
    )),
    ("delay", (
        ("delay_seconds", "seconds", (0.0, 0.7, 0.05), (0.01, 0.2, 0.02)),
        ("feedback", "ratio", (0.0, 0.6, 0.05), (0.01, 0.2, 0.02)),
        ("mix_ratio", "ratio", (0.0, 1.0, 0.1), (0.1, 1.0, 0.1)),
    )),
    ("limiter", (
        ("threshold_db", "dB", (-20.0, -1.0, 1.0), (-5.0, -1.0, 0.1)),
        ("release_ms", "ms", (0.0, 1000.0, 50.0), (0.0, 300.0, 25.0)),
    )),
)


def registry_default() -> FxRegistry:
    """Build the stock nine-module registry. Pure and deterministic."""
    modules = []
    for mod_name, rows in _TABLE:
        params = tuple(
            ParamSchema(
                name=name, unit=unit,
                coarse_min=c[0], coarse_max=c[1], coarse_step=c[2],
                fine_min=f[0], fine_max=f[1], fine_step=f[2],
            )
            for name, unit, c, f in rows
        )
        modules.append(FxModuleSchema(name=mod_name, params=params))
    return FxRegistry(modules=tuple(modules))


def normalize_param(module: str, param: str, value: float, registry: FxRegistry) -> float:
    """Map an in-range value onto [0, 1] over its coarse range."""
    schema = registry.module(module).param(param)
    lo, hi = schema.coarse_min, schema.coarse_max
    if not (lo - 1e-9 <= value <= hi + 1e-9):
        raise RegistryError(
            f"{module}.{param} value {value} outside coarse range [{lo}, {hi}]"
        )
    return (value - lo) / (hi - lo)


def denormalize_param(module: str, param: str, unit_value: float, registry: FxRegistry) -> float:
    """Exact inverse of :func:`normalize_param`."""
    schema = registry.module(module).param(param)
    if not (-1e-9 <= unit_value <= 1.0 + 1e-9):
        raise RegistryError(f"{module}.{param} normalized value {unit_value} outside [0, 1]")
    return schema.coarse_min + unit_value * (schema.coarse_max - schema.coarse_min)


def quantize_param(module: str, param: str, value: float, regime: str, registry: FxRegistry) -> float:
    """Snap a value to the nearest grid point of the given regime.

    Grid points are min + k*step for integer k >= 0; exact ties round toward
    the regime minimum.
    """
    schema = registry.module(module).param(param)
    lo, hi, step = schema.range_for(regime)
    if not (lo - 1e-9 <= value <= hi + 1e-9):
        raise RegistryError(
            f"{module}.{param} value {value} outside {regime} range [{lo}, {hi}]"
        )
    kf = (value - lo) / step
    k = math.floor(kf + 0.5)
    if k - kf == 0.5:
        k -= 1
    k = min(max(k, 0), schema.grid_size(regime) - 1)
    return _snap(lo + k * step)


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" or "warning"
    message: str
    call_index: int | None = None
    tool: str | None = None
    param: str | None = None


@dataclass(frozen=True)
class ValidationReport:
    """Issue list plus, under the clamp policy, the repaired chain."""

    issues: tuple[ValidationIssue, ...]
    repaired: FxChain | None = None

    @property
    def ok(self) -> bool:
        return not any(i.severity == "error" for i in self.issues)

    @property
    def errors(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "error")

    @property
    def warnings(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "warning")


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def validate_chain(chain: FxChain, registry: FxRegistry, policy: str = "strict") -> ValidationReport:
    """Check a chain against the registry, reporting every issue found.

    strict: unknown tools, unknown/missing/non-numeric arguments, duplicate
    tools, and out-of-coarse-range values are all errors. clamp: out-of-range
    values are clamped to the coarse range (warning); structurally broken
    calls are dropped from the repaired chain (error). Never raises on chain
    content.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    issues: list[ValidationIssue] = []
    repaired: list[FxCall] = []
    seen: set[str] = set()

    def err(msg, idx=None, tool=None, param=None):
        issues.append(ValidationIssue("error", msg, idx, tool, param))

    def warn(msg, idx=None, tool=None, param=None):
        issues.append(ValidationIssue("warning", msg, idx, tool, param))

    for idx, call in enumerate(chain.calls):
        tool = call.tool
        if not isinstance(tool, str) or tool not in registry:
            err(f"call {idx}: unknown tool {tool!r}", idx, str(tool))
            continue
        if tool in seen:
            err(f"call {idx}: duplicate tool {tool!r}", idx, tool)
            continue
        seen.add(tool)
        module = registry.module(tool)
        known = set(module.param_names)
        for key in call.arguments:
            if key not in known:
                if policy == "strict":
                    err(f"call {idx}: unknown argument {key!r} for {tool}", idx, tool, str(key))
                else:
                    warn(f"call {idx}: dropped unknown argument {key!r} for {tool}", idx, tool, str(key))
        args: dict = {}
        droppable = False
        for p in module.params:
            if p.name not in call.arguments:
                err(f"call {idx}: missing argument {p.name!r} for {tool}", idx, tool, p.name)
                droppable = True
                continue
            value = call.arguments[p.name]
            if not _is_number(value):
                err(f"call {idx}: non-numeric value {value!r} for {tool}.{p.name}", idx, tool, p.name)
                droppable = True
                continue
            value = float(value)
            if value < p.coarse_min or value > p.coarse_max:
                if policy == "strict":
                    err(
                        f"call {idx}: {tool}.{p.name} value {value} outside "
                        f"[{p.coarse_min}, {p.coarse_max}]", idx, tool, p.name,
                    )
                else:
                    clamped = min(max(value, p.coarse_min), p.coarse_max)
                    warn(
                        f"call {idx}: clamped {tool}.{p.name} from {value} to {clamped}",
                        idx, tool, p.name,
                    )
                    value = clamped
            args[p.name] = value
        if not droppable:
            repaired.append(FxCall(tool=tool, arguments=args))
        elif policy == "clamp":
            warn(f"call {idx}: dropped structurally invalid call to {tool}", idx, tool)

    return ValidationReport(
        issues=tuple(issues),
        repaired=FxChain(tuple(repaired)) if policy == "clamp" else None,
    )


def registry_to_jsonable(registry: FxRegistry) -> dict:
    """Registry as a plain JSON document (the tool-schema payload for prompts)."""
    return {
        "modules": [
            {
                "name": m.name,
                "params": [
                    {
                        "name": p.name,
                        "unit": p.unit,
                        "coarse": {"min": p.coarse_min, "max": p.coarse_max, "step": p.coarse_step},
                        "fine": {"min": p.fine_min, "max": p.fine_max, "step": p.fine_step},
                    }
                    for p in m.params
                ],
            }
            for m in registry.modules
        ]
    }


def registry_from_jsonable(doc: dict) -> FxRegistry:
    try:
        modules = tuple(
            FxModuleSchema(
                name=m["name"],
                params=tuple(
                    ParamSchema(
                        name=p["name"], unit=p["unit"],
                        coarse_min=float(p["coarse"]["min"]),
                        coarse_max=float(p["coarse"]["max"]),
                        coarse_step=float(p["coarse"]["step"]),
                        fine_min=float(p["fine"]["min"]),
                        fine_max=float(p["fine"]["max"]),
                        fine_step=float(p["fine"]["step"]),
                    )
                    for p in m["params"]
                ),
            )
            for m in doc["modules"]
        )
    except (KeyError, TypeError) as exc:
        raise RegistryError(f"malformed registry document: {exc}") from exc
    return FxRegistry(modules=modules)


def registry_fingerprint(registry: FxRegistry) -> str:
    """Stable sha256 of the canonical registry JSON."""
    payload = json.dumps(registry_to_jsonable(registry), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
