"""Pipeline configuration: defaults, JSON loading, validation, fingerprinting.

The config document is flat JSON with one section per pipeline stage.  Every
key has a default, unknown keys are rejected by name, and command-line flags
override file values (handled in the cli module).  ``fingerprint`` hashes
the fully resolved config so reports can state exactly what produced them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

from .classify import MlpSettings
from .dataset import SyntheticConfig
from .errors import ConfigError
from .vbgmm import FitSettings, MixturePrior

METHOD_NAMES = ("summertime", "ann_voting", "linreg_local", "fivereg_ann",
                "ann_regression")


@dataclass(frozen=True)
class GmmConfig:
    k_max: int = 20
    dirichlet_alpha0: float = 1e-3
    beta0: float = 1.0
    nu0: float | None = None  # None: feature dimension + 1
    tol: float = 1e-6
    max_iter: int = 500
    weight_floor: float | None = None  # None: 1 / (10 * training size)
    seed: int = 0

    def fit_settings(self) -> FitSettings:
        return FitSettings(
            k_max=self.k_max,
            max_iter=self.max_iter,
            tol=self.tol,
            weight_floor=self.weight_floor,
            prior=MixturePrior(
                dirichlet_alpha0=self.dirichlet_alpha0,
                beta0=self.beta0,
                nu0=self.nu0,
            ),
        )

    def validate(self) -> None:
        if self.k_max < 1:
            raise ConfigError("gmm.k_max must be positive")
        if self.dirichlet_alpha0 <= 0:
            raise ConfigError("gmm.dirichlet_alpha0 must be positive")
        if self.beta0 <= 0:
            raise ConfigError("gmm.beta0 must be positive")
        if self.tol <= 0:
            raise ConfigError("gmm.tol must be positive")
        if self.max_iter < 1:
            raise ConfigError("gmm.max_iter must be positive")
        if self.weight_floor is not None and not 0 < self.weight_floor < 1:
            raise ConfigError("gmm.weight_floor must be in (0, 1)")


@dataclass(frozen=True)
class MlpConfig:
    hidden_units: int = 25
    learning_rate: float = 0.01
    epochs: int = 500
    batch_size: int = 32
    l2_penalty: float = 1e-4
    seed: int = 0

    def settings(self) -> MlpSettings:
        return MlpSettings(
            hidden_units=self.hidden_units,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            l2_penalty=self.l2_penalty,
        )

    def validate(self) -> None:
        if self.hidden_units < 1:
            raise ConfigError("mlp.hidden_units must be positive")
        if self.learning_rate <= 0:
            raise ConfigError("mlp.learning_rate must be positive")
        if self.epochs < 1:
            raise ConfigError("mlp.epochs must be positive")
        if self.batch_size < 1:
            raise ConfigError("mlp.batch_size must be positive")
        if self.l2_penalty < 0:
            raise ConfigError("mlp.l2_penalty must be nonnegative")


@dataclass(frozen=True)
class RegressionConfig:
    mode: str = "augmented"  # or 'window_only'
    aggregation: str = "mean"  # or 'sum'

    def validate(self) -> None:
        if self.mode not in ("augmented", "window_only"):
            raise ConfigError(
                f"regression.mode must be 'augmented' or 'window_only', got {self.mode!r}"
            )
        if self.aggregation not in ("mean", "sum"):
            raise ConfigError(
                f"regression.aggregation must be 'mean' or 'sum', got {self.aggregation!r}"
            )


@dataclass(frozen=True)
class EvaluationConfig:
    methods: tuple[str, ...] = ("summertime",)
    parallel_folds: int = 1

    def validate(self) -> None:
        if not self.methods:
            raise ConfigError("evaluation.methods must list at least one method")
        for name in self.methods:
            if name not in METHOD_NAMES:
                raise ConfigError(
                    f"evaluation.methods contains unknown method {name!r}; "
                    f"expected one of {', '.join(METHOD_NAMES)}"
                )
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("evaluation.methods contains duplicates")
        if self.parallel_folds < 1:
            raise ConfigError("evaluation.parallel_folds must be positive")


@dataclass(frozen=True)
class SyntheticSection:
    subjects: int = 10
    bouts_per_class: int = 3
    seed: int = 7

    def generator_config(self, window_length: int) -> SyntheticConfig:
        return SyntheticConfig(
            subjects=self.subjects,
            bouts_per_class=self.bouts_per_class,
            window_length=window_length,
        )

    def validate(self) -> None:
        if self.subjects < 1:
            raise ConfigError("synthetic.subjects must be positive")
        if self.bouts_per_class < 1:
            raise ConfigError("synthetic.bouts_per_class must be positive")


@dataclass(frozen=True)
class IoConfig:
    corpus: str | None = None  # directory to load; None: generate synthetic
    out: str = "out"

    def validate(self) -> None:
        if not self.out:
            raise ConfigError("io.out must be a nonempty path")


@dataclass(frozen=True)
class PipelineConfig:
    window_length: int = 12
    gmm: GmmConfig = field(default_factory=GmmConfig)
    mlp: MlpConfig = field(default_factory=MlpConfig)
    regression: RegressionConfig = field(default_factory=RegressionConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    synthetic: SyntheticSection = field(default_factory=SyntheticSection)
    io: IoConfig = field(default_factory=IoConfig)

    def validate(self) -> "PipelineConfig":
        if self.window_length < 2:
            raise ConfigError("window_length must be >= 2")
        self.gmm.validate()
        self.mlp.validate()
        self.regression.validate()
        self.evaluation.validate()
        self.synthetic.validate()
        self.io.validate()
        return self

    def to_dict(self) -> dict:
        return {
            "window_length": self.window_length,
            "gmm": _section_dict(self.gmm),
            "mlp": _section_dict(self.mlp),
            "regression": _section_dict(self.regression),
            "evaluation": {
                "methods": list(self.evaluation.methods),
                "parallel_folds": self.evaluation.parallel_folds,
            },
            "synthetic": _section_dict(self.synthetic),
            "io": _section_dict(self.io),
        }

    def semantic_dict(self) -> dict:
        """Config minus execution plumbing (output paths, fold parallelism).

        Serial and parallel runs of one config must produce identical
        reports, so only this view may enter fingerprints and report files.
        """
        semantic = self.to_dict()
        del semantic["io"]
        del semantic["evaluation"]["parallel_folds"]
        return semantic

    def fingerprint(self, extra: dict | None = None) -> str:
        """Hash of everything that determines results."""
        payload = {"config": self.semantic_dict()}
        if extra:
            payload.update(extra)
        canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


_SECTIONS = {
    "gmm": GmmConfig,
    "mlp": MlpConfig,
    "regression": RegressionConfig,
    "evaluation": EvaluationConfig,
    "synthetic": SyntheticSection,
    "io": IoConfig,
}


def _section_dict(section: Any) -> dict:
    return {f.name: getattr(section, f.name) for f in fields(section)}


def _build_section(name: str, cls: type, payload: Any) -> Any:
    if not isinstance(payload, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    for key in payload:
        if key not in known:
            raise ConfigError(f"unknown config key {name}.{key}")
    values = dict(payload)
    if name == "evaluation" and "methods" in values:
        methods = values["methods"]
        if isinstance(methods, str):
            methods = [m.strip() for m in methods.split(",") if m.strip()]
        if not isinstance(methods, (list, tuple)):
            raise ConfigError("evaluation.methods must be a list of method names")
        values["methods"] = tuple(methods)
    return cls(**values)


def config_from_dict(payload: dict) -> PipelineConfig:
    """Build and validate a config; unknown keys raise naming the offender."""
    if not isinstance(payload, dict):
        raise ConfigError("config document must be a JSON object")
    known_top = {"window_length"} | set(_SECTIONS)
    for key in payload:
        if key not in known_top:
            raise ConfigError(f"unknown config key {key}")
    kwargs: dict[str, Any] = {}
    if "window_length" in payload:
        value = payload["window_length"]
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError("window_length must be an integer")
        kwargs["window_length"] = value
    for name, cls in _SECTIONS.items():
        if name in payload:
            kwargs[name] = _build_section(name, cls, payload[name])
    try:
        config = PipelineConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    return config.validate()


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(payload)


def apply_overrides(config: PipelineConfig, *, seed: int | None = None,
                    window_length: int | None = None,
                    methods: Sequence[str] | None = None,
                    aggregation: str | None = None,
                    parallel_folds: int | None = None,
                    out: str | None = None,
                    corpus: str | None = None) -> PipelineConfig:
    """Command-line flag overrides; flags win over file values."""
    if seed is not None:
        config = replace(config, synthetic=replace(config.synthetic, seed=seed))
    if window_length is not None:
        config = replace(config, window_length=window_length)
    if methods is not None:
        config = replace(
            config, evaluation=replace(config.evaluation, methods=tuple(methods))
        )
    if aggregation is not None:
        config = replace(
            config, regression=replace(config.regression, aggregation=aggregation)
        )
    if parallel_folds is not None:
        config = replace(
            config, evaluation=replace(config.evaluation, parallel_folds=parallel_folds)
        )
    if out is not None:
        config = replace(config, io=replace(config.io, out=out))
    if corpus is not None:
        config = replace(config, io=replace(config.io, corpus=corpus))
    return config.validate()
