"""JSON run configuration: loading, validation and object construction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from ..core import ModelId, SchemeParams
from ..models import InitialCondition, ModelError, ModelSpec
from .sweeps import Reference, SweepError, SweepPlan


class ConfigError(ValueError):
    pass


def load_schema() -> dict:
    text = resources.files("kinetic_mc.harness").joinpath("config.schema.json").read_text()
    return json.loads(text)


def _format_error(err: jsonschema.ValidationError) -> str:
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    return f"{where}: {err.message}"


def validate_config(raw: dict) -> dict:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(_format_error(e) for e in errors))
    return raw


def read_config(path: str | Path) -> dict:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return validate_config(raw)


@dataclass
class RunConfig:
    raw: dict
    model: ModelSpec
    ic: InitialCondition | None
    params: SchemeParams | None
    equilibrium: dict | None
    plan: SweepPlan | None
    output: dict = field(default_factory=dict)


def build_model(section: dict) -> ModelSpec:
    mid = ModelId(section["id"])
    kwargs = {k: v for k, v in section.items() if k != "id"}
    default_d = {ModelId.MORGENSTERN: 3, ModelId.KINETIC_OPT: 2}.get(mid, 1)
    d = kwargs.pop("d", default_d)
    if mid is ModelId.WEALTH:
        kwargs.setdefault("gamma", 0.25)
    if mid is ModelId.OPINION:
        kwargs.setdefault("gamma", 0.25)
        kwargs.setdefault("noise", 0.2)
    if mid is ModelId.KINETIC_OPT:
        kwargs.setdefault("lam", 0.5)
        kwargs.setdefault("sigma", 0.5)
        kwargs.setdefault("beta_weight", 10.0)
        kwargs.setdefault("objective", "quadratic")
    if "shift" in kwargs:
        kwargs["shift"] = tuple(kwargs["shift"])
    if isinstance(kwargs.get("theta_point"), list):
        kwargs["theta_point"] = tuple(kwargs["theta_point"])
    return ModelSpec(mid, d, **kwargs)


def build_ic(section: dict) -> InitialCondition:
    kwargs = dict(section)
    kind = kwargs.pop("kind")
    return InitialCondition(kind, **{k: tuple(map(tuple, v)) if k == "atoms" else tuple(v) for k, v in kwargs.items()})


def build_params(section: dict, seed: int | None = None) -> tuple[SchemeParams, dict | None]:
    s = dict(section)
    eq = s.pop("equilibrium", None)
    params = SchemeParams(
        scheme=s["name"],
        dt=s["dt"],
        horizon=s["horizon"],
        n_particles=s.get("n_particles", 1000),
        epsilon=s.get("epsilon"),
        seed=s.get("seed", 0) if seed is None else seed,
        record_every=s.get("record_every", 0),
    )
    return params, eq


def build_plan(section: dict, model, ic, params, equilibrium, seed: int | None = None) -> SweepPlan:
    ref = section["reference"]
    return SweepPlan(
        axis=section["axis"],
        values=tuple(section["values"]),
        replications=section.get("replications", 20),
        reference=Reference(ref["kind"], ref.get("factor", 32), ref.get("quantity", "mean")),
        params=params,
        model=model,
        ic=ic,
        master_seed=section.get("master_seed", 0) if seed is None else seed,
        n_slices=section.get("n_slices", 200),
        equilibrium=equilibrium,
        mc_particles=section.get("mc_particles", 0),
    )


def build(raw: dict, seed: int | None = None, need: tuple[str, ...] = ()) -> RunConfig:
    """Turn a validated config dict into solver objects.

    ``seed`` overrides both the scheme seed and the sweep master seed.
    ``need`` lists the sections the caller requires.
    """
    validate_config(raw)
    missing = [s for s in need if s not in raw]
    if missing:
        raise ConfigError(f"configuration lacks required section(s): {', '.join(missing)}")
    try:
        model = build_model(raw["model"])
        ic = build_ic(raw["initial_condition"]) if "initial_condition" in raw else None
        params = eq = plan = None
        if "scheme" in raw:
            params, eq = build_params(raw["scheme"], seed)
        if "sweep" in raw:
            if params is None or ic is None:
                raise ConfigError("a sweep needs the scheme and initial_condition sections")
            plan = build_plan(raw["sweep"], model, ic, params, eq, seed)
    except (ModelError, SweepError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(raw, model, ic, params, eq, plan, raw.get("output", {}))
