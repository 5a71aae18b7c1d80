"""Timestep-adaptive layer selection between a subject and a style adapter.

At denoising progress p the linear adaptation factor is

    γ(p) = α·p + (1 − D)

with D the style similarity score in [0, 1]. A layer keeps the subject
update iff e_content ≥ γ·e_style, ties to subject. Energies are constant
over the run while γ is non-decreasing in p, so each layer flips at most
once, from subject (2) to style (1).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import energy as energy_mod
from .adapter_io import AlignedPair
from .errors import GateConfigError, InputError
from .jsonio import dumps, sha256_hex

STYLE = 1
SUBJECT = 2

SELECTORS = ("est", "klora_like", "direct_merge", "style_only", "subject_only")


@dataclass(frozen=True)
class GateConfig:
    """Selection hyperparameters.

    alpha weighs the time term; steps is the denoising step count T;
    d_score is the style similarity D. direct_weights and k_fraction
    only matter for their respective baseline selectors.
    """

    alpha: float = 1.5
    steps: int = 50
    d_score: float = 0.5
    tie_policy: str = "content-on-tie"
    selector: str = "est"
    direct_weights: tuple[float, float] = (0.5, 0.5)
    k_fraction: float = 0.1

    def __post_init__(self) -> None:
        if not self.alpha >= 0:
            raise GateConfigError(f"alpha must be >= 0, got {self.alpha}")
        if not isinstance(self.steps, int) or self.steps < 1:
            raise GateConfigError(f"steps must be a positive integer, got {self.steps}")
        if not 0.0 <= self.d_score <= 1.0:
            raise GateConfigError(f"d_score must be in [0, 1], got {self.d_score}")
        if self.tie_policy != "content-on-tie":
            raise GateConfigError(f"unsupported tie_policy {self.tie_policy!r}")
        if self.selector not in SELECTORS:
            raise GateConfigError(f"unknown selector {self.selector!r}")
        w_c, w_s = self.direct_weights
        if not (w_c >= 0 and w_s >= 0):
            raise GateConfigError(f"direct_weights must be >= 0, got {self.direct_weights}")
        if not 0.0 < self.k_fraction <= 1.0:
            raise GateConfigError(f"k_fraction must be in (0, 1], got {self.k_fraction}")


@dataclass(frozen=True)
class SelectionSchedule:
    steps: int
    ordered_keys: tuple[str, ...]
    choices: np.ndarray  # (T, L) int8, entries STYLE=1 / SUBJECT=2
    gamma_trace: tuple[float, ...]
    config: GateConfig
    energy_digest: str


@dataclass(frozen=True)
class MergePlan:
    """Uniform arithmetic merge; no per-layer choice is made."""

    ordered_keys: tuple[str, ...]
    w_content: float
    w_style: float
    config: GateConfig
    energy_digest: str


def gamma(step_index: int, config: GateConfig) -> float:
    """α·p + (1 − D) at progress p = step_index/(T−1); p = 0 when T = 1."""
    if not 0 <= step_index < config.steps:
        raise InputError(
            f"step index {step_index} out of range for {config.steps} steps"
        )
    if config.steps > 1:
        progress = step_index / (config.steps - 1)
    else:
        progress = 0.0
    return config.alpha * progress + (1.0 - config.d_score)


def select(e_content: float, e_style: float, gamma_value: float) -> int:
    """SUBJECT iff e_content ≥ γ·e_style, STYLE otherwise; ties to subject.

    The degenerate 0/0 case lands on the tie branch, so it is subject too.
    """
    return SUBJECT if e_content >= gamma_value * e_style else STYLE


def _energy_arrays(
    ordered_keys: tuple[str, ...],
    energies: list[energy_mod.LayerEnergyReport],
) -> tuple[np.ndarray, np.ndarray]:
    by_key = {r.key: r for r in energies}
    e_c = np.empty(len(ordered_keys), dtype=np.float64)
    e_s = np.empty(len(ordered_keys), dtype=np.float64)
    for j, key in enumerate(ordered_keys):
        rec = by_key.get(key)
        if rec is None:
            raise InputError(f"missing energy for layer {key!r}")
        e_c[j] = rec.e_content
        e_s[j] = rec.e_style
    return e_c, e_s


def _choice_matrix(
    e_c: np.ndarray, e_s: np.ndarray, gamma_trace: tuple[float, ...]
) -> np.ndarray:
    choices = np.empty((len(gamma_trace), len(e_c)), dtype=np.int8)
    for i, g in enumerate(gamma_trace):
        choices[i] = np.where(e_c >= g * e_s, SUBJECT, STYLE)
    return choices


def plan_from_energies(
    ordered_keys: tuple[str, ...],
    energies: list[energy_mod.LayerEnergyReport],
    config: GateConfig,
) -> SelectionSchedule:
    """Schedule from precomputed energies; the adapters themselves are not
    needed since the est rule only compares scalar energies per layer."""
    if config.selector != "est":
        raise InputError(f"plan requires selector 'est', got {config.selector!r}")
    e_c, e_s = _energy_arrays(ordered_keys, energies)
    trace = tuple(gamma(i, config) for i in range(config.steps))
    return SelectionSchedule(
        steps=config.steps,
        ordered_keys=tuple(ordered_keys),
        choices=_choice_matrix(e_c, e_s, trace),
        gamma_trace=trace,
        config=config,
        energy_digest=energy_mod.report_digest(energies),
    )


def plan(
    pair: AlignedPair,
    energies: list[energy_mod.LayerEnergyReport],
    config: GateConfig,
) -> SelectionSchedule:
    """The full T × L selection schedule for the est selector."""
    return plan_from_energies(pair.ordered_keys, energies, config)


def plan_baseline(
    pair: AlignedPair,
    energies: list[energy_mod.LayerEnergyReport],
    config: GateConfig,
) -> "SelectionSchedule | MergePlan":
    """Baseline selectors: constant schedules, uniform merge, or Top-K."""
    digest = energy_mod.report_digest(energies)
    keys = pair.ordered_keys
    if config.selector == "est":
        raise InputError("selector 'est' belongs to plan, not plan_baseline")
    if config.selector in ("style_only", "subject_only"):
        value = STYLE if config.selector == "style_only" else SUBJECT
        trace = tuple(gamma(i, config) for i in range(config.steps))
        choices = np.full((config.steps, len(keys)), value, dtype=np.int8)
        return SelectionSchedule(
            steps=config.steps,
            ordered_keys=keys,
            choices=choices,
            gamma_trace=trace,
            config=config,
            energy_digest=digest,
        )
    if config.selector == "direct_merge":
        w_c, w_s = config.direct_weights
        return MergePlan(
            ordered_keys=keys,
            w_content=w_c,
            w_style=w_s,
            config=config,
            energy_digest=digest,
        )
    if config.selector == "klora_like":
        # Top-K importances replace Frobenius energies, and the style
        # prior is disabled: γ keeps only its time term (D fixed to 1).
        i_c = np.empty(len(keys), dtype=np.float64)
        i_s = np.empty(len(keys), dtype=np.float64)
        for j, key in enumerate(keys):
            c_layer = pair.content.layers[key]
            s_layer = pair.style.layers[key]
            m, n = c_layer.delta_shape
            k = max(1, int(config.k_fraction * m * n))
            i_c[j] = energy_mod.topk_abs_sum(c_layer, k)
            i_s[j] = energy_mod.topk_abs_sum(s_layer, k)
        forced = replace(config, d_score=1.0)
        trace = tuple(gamma(i, forced) for i in range(config.steps))
        return SelectionSchedule(
            steps=config.steps,
            ordered_keys=keys,
            choices=_choice_matrix(i_c, i_s, trace),
            gamma_trace=trace,
            config=config,
            energy_digest=digest,
        )
    raise InputError(f"invalid selector {config.selector!r}")


def onset_step(e_content: float, e_style: float, config: GateConfig) -> int | None:
    """First step index at which the layer selects style; None if never.

    Scans the same γ sequence the planner uses, so the two always agree.
    """
    for i in range(config.steps):
        if select(e_content, e_style, gamma(i, config)) == STYLE:
            return i
    return None


def config_to_obj(config: GateConfig) -> dict:
    return {
        "alpha": float(config.alpha),
        "steps": config.steps,
        "d_score": float(config.d_score),
        "tie_policy": config.tie_policy,
        "selector": config.selector,
        "direct_weights": [float(config.direct_weights[0]), float(config.direct_weights[1])],
        "k_fraction": float(config.k_fraction),
    }


def config_from_obj(obj: dict) -> GateConfig:
    if not isinstance(obj, dict):
        raise InputError("config must be a JSON object")
    known = {
        "alpha", "steps", "d_score", "tie_policy", "selector",
        "direct_weights", "k_fraction",
    }
    unknown = set(obj) - known
    if unknown:
        raise InputError(f"unknown config fields: {sorted(unknown)}")
    kwargs = dict(obj)
    if "direct_weights" in kwargs:
        dw = kwargs["direct_weights"]
        if not isinstance(dw, list) or len(dw) != 2:
            raise InputError(f"direct_weights must be a 2-element list, got {dw!r}")
        kwargs["direct_weights"] = (float(dw[0]), float(dw[1]))
    try:
        return GateConfig(**kwargs)
    except TypeError as exc:
        raise InputError(f"bad config: {exc}") from None


def merge_plan_to_obj(plan_obj: MergePlan) -> dict:
    return {
        "selector": "direct_merge",
        "layers": list(plan_obj.ordered_keys),
        "weights": {
            "w_content": float(plan_obj.w_content),
            "w_style": float(plan_obj.w_style),
        },
        "config": config_to_obj(plan_obj.config),
        "energy_digest": plan_obj.energy_digest,
    }


def schedule_to_obj(schedule: SelectionSchedule) -> dict:
    return {
        "steps": schedule.steps,
        "layers": list(schedule.ordered_keys),
        "choices": [[int(v) for v in row] for row in schedule.choices],
        "gamma": [float(g) for g in schedule.gamma_trace],
        "config": config_to_obj(schedule.config),
        "energy_digest": schedule.energy_digest,
    }


def schedule_to_json(schedule: SelectionSchedule) -> str:
    return dumps(schedule_to_obj(schedule))


def schedule_digest(schedule: SelectionSchedule) -> str:
    return sha256_hex(schedule_to_json(schedule))


def schedule_from_obj(obj: dict) -> SelectionSchedule:
    if not isinstance(obj, dict):
        raise InputError("schedule must be a JSON object")
    for field_name in ("steps", "layers", "choices", "gamma", "config", "energy_digest"):
        if field_name not in obj:
            raise InputError(f"schedule missing field {field_name!r}")
    steps = obj["steps"]
    layers = obj["layers"]
    choices = obj["choices"]
    trace = obj["gamma"]
    if not isinstance(steps, int) or steps < 1:
        raise InputError(f"steps must be a positive integer, got {steps!r}")
    if not isinstance(layers, list) or not all(isinstance(k, str) for k in layers):
        raise InputError("layers must be a list of strings")
    if not isinstance(choices, list) or len(choices) != steps:
        raise InputError(f"choices must have {steps} rows")
    matrix = np.empty((steps, len(layers)), dtype=np.int8)
    for i, row in enumerate(choices):
        if not isinstance(row, list) or len(row) != len(layers):
            raise InputError(f"choices row {i} must have {len(layers)} entries")
        for j, v in enumerate(row):
            if v not in (STYLE, SUBJECT):
                raise InputError(f"choices[{i}][{j}] must be 1 or 2, got {v!r}")
            matrix[i, j] = v
    if not isinstance(trace, list) or len(trace) != steps:
        raise InputError(f"gamma must have {steps} entries")
    digest = obj["energy_digest"]
    if not isinstance(digest, str):
        raise InputError("energy_digest must be a string")
    return SelectionSchedule(
        steps=steps,
        ordered_keys=tuple(layers),
        choices=matrix,
        gamma_trace=tuple(float(g) for g in trace),
        config=config_from_obj(obj["config"]),
        energy_digest=digest,
    )


def schedule_from_json(text: str) -> SelectionSchedule:
    import json as _json

    try:
        obj = _json.loads(text)
    except _json.JSONDecodeError as exc:
        raise InputError(f"malformed schedule JSON: {exc}") from None
    return schedule_from_obj(obj)


def schedule_to_csv(schedule: SelectionSchedule) -> str:
    """Header row of layer keys, one row per step, entries 1/2."""
    for key in schedule.ordered_keys:
        if "," in key or "\n" in key or '"' in key:
            raise InputError(f"layer key {key!r} cannot appear in CSV output")
    lines = [",".join(schedule.ordered_keys)]
    for row in schedule.choices:
        lines.append(",".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"
