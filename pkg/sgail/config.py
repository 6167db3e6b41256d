"""Flat ``key = value`` configuration files.

Keys are dotted (``train.gamma = 0.95``); ``#`` starts a comment. Values are read as
booleans (``true``/``false``), integers, floats, comma-separated lists of those, or
plain strings.

"""
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from .optim import TrpoConfig
from .trainer import TrainConfig
from .typus import BetaMode, EnvId, ExperimentId
from .variant import BetaSchedule, ConfigError, ModelVariant

__all__ = ["ConfigError", "ExperimentConfig", "parse_value", "parse_config", "load_config", "build_config"]

_TRAIN_KEYS = {"n_experts", "epochs", "episodes_per_epoch", "d_updates", "gamma", "lr_d", "lr_v", "lr_q", "seed",
               "eval_interval", "eval_trials", "hidden_layers", "n_slots", "n_tasks", "sweep_eval_starts"}
_TRPO_KEYS = {f.name for f in fields(TrpoConfig)}
_BETA_KEYS = {"start", "end", "mode", "span"}
_VARIANT_KEYS = {"name", "info_lambda1", "info_lambda2"}
_ENV_KEYS = {"id", "layout", "horizon"}
_EXPERIMENT_KEYS = {"id", "seeds", "out", "epochs", "eval_interval", "variants"}


@dataclass(frozen=True)
class ExperimentConfig:
    """An experiment design, the seeds to repeat it with and where its outputs go.

    Parameters
    ----------
    experiment - Which experiment to run.
    seeds - Seeds every condition is repeated with.
    out - Output directory.
    train - Base training settings the experiment's conditions are derived from.
    variants - Restricts the conditions to these variant names when given.

    """

    experiment: ExperimentId = ExperimentId.GridVariants
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    out: str = "runs"
    train: TrainConfig = field(default_factory=TrainConfig)
    variants: tuple[str, ...] | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "experiment", ExperimentId(self.experiment))
        except ValueError as e:
            raise ConfigError(f"Unknown experiment {self.experiment!r}") from e
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ConfigError("At least one seed is needed")
        if self.variants is not None:
            object.__setattr__(self, "variants", tuple(self.variants))


def parse_value(text: str) -> Any:
    """Interpret one config value.

    Examples
    --------
    >>> parse_value("0.95"), parse_value("64, 64"), parse_value("true"), parse_value("grid")
    (0.95, [64, 64], True, 'grid')

    """
    text = text.strip()
    if "," in text:
        return [parse_value(part) for part in text.split(",") if part.strip()]
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def parse_config(text: str) -> dict[str, Any]:
    """Parse the flat file format into a dict keyed by the dotted names.

    Raises
    ------
    ConfigError for lines without ``=``, keys without a section, or repeated keys.

    """
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or "." not in key:
            raise ConfigError(f"Line {number}: expected 'section.key = value', got {raw.strip()!r}")
        if key in values:
            raise ConfigError(f"Line {number}: {key} is set twice")
        values[key] = parse_value(value)
    return values


def _as_list(value) -> list:
    return value if isinstance(value, list) else [value]


def build_config(values: Mapping[str, Any]) -> ExperimentConfig:
    """Turn parsed key/values into an :class:`ExperimentConfig`.

    Raises
    ------
    ConfigError for unknown keys or values the configs reject.

    """
    sections: dict[str, dict[str, Any]] = {}
    allowed = dict(experiment=_EXPERIMENT_KEYS, train=_TRAIN_KEYS, trpo=_TRPO_KEYS, beta=_BETA_KEYS,
                   variant=_VARIANT_KEYS, env=_ENV_KEYS)
    for key, value in values.items():
        section, _, name = key.partition(".")
        if section not in allowed or name not in allowed[section]:
            raise ConfigError(f"Unknown config key {key}")
        sections.setdefault(section, {})[name] = value

    train, trpo, beta = sections.get("train", {}), sections.get("trpo", {}), sections.get("beta", {})
    variant, env, experiment = sections.get("variant", {}), sections.get("env", {}), sections.get("experiment", {})
    try:
        if "hidden_layers" in train:
            train["hidden_layers"] = tuple(_as_list(train["hidden_layers"]))
        if "epochs" in experiment:
            train["epochs"] = experiment["epochs"]
        if "eval_interval" in experiment:
            train["eval_interval"] = experiment["eval_interval"]
        schedule = BetaSchedule(**(beta | {"mode": BetaMode(beta.get("mode", BetaMode.Constant))}))
        model = ModelVariant.from_name(str(variant.get("name", "sgail+erc")),
                                       **{k: float(v) for k, v in variant.items() if k != "name"})
        cfg = TrainConfig(variant=model, trpo=TrpoConfig(**trpo), beta=schedule,
                          env=EnvId(env.get("id", EnvId.Grid)), layout=env.get("layout"), horizon=env.get("horizon"),
                          **train)
        variants = experiment.get("variants")
        return ExperimentConfig(experiment=experiment.get("id", ExperimentId.GridVariants),
                                seeds=tuple(_as_list(experiment.get("seeds", [0, 1, 2, 3, 4]))),
                                out=str(experiment.get("out", "runs")),
                                train=cfg,
                                variants=None if variants is None else tuple(str(v) for v in _as_list(variants)))
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from e


def load_config(path: str | Path | None = None, *, seed: int | None = None, out: str | None = None,
                variant: str | None = None) -> ExperimentConfig:
    """Read a config file (defaults everywhere when ``path`` is None) and apply command-line overrides."""
    values = parse_config(Path(path).read_text()) if path else {}
    if variant is not None:
        values["variant.name"] = variant
    cfg = build_config(values)
    if seed is not None:
        cfg = replace(cfg, seeds=(seed,), train=replace(cfg.train, seed=seed))
    if out is not None:
        cfg = replace(cfg, out=out)
    return cfg
