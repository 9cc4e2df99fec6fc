"""JSON run configuration: strict parsing (unknown keys are fatal) and
assembly of predictor families from their declarations.

Relative paths inside a config file resolve against the file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .ensemble import EnsembleSpec
from .errors import ConfigError, DataError
from .geometry import ALL_VARIANTS, ROTATIONS_PLUS_HFLIP, AugmentationConfig, TtaVariant
from .metrics import LossConfig
from .postprocess import PostprocessConfig
from .predictor import ConstantPredictor, ToyModel, ToyPredictor, load_file_predictor

_VARIANT_PRESETS = {
    "all": ALL_VARIANTS,
    "rotations-plus-hflip": ROTATIONS_PLUS_HFLIP,
}


@dataclass(frozen=True)
class PredictorDecl:
    """One model family as declared in the config file."""

    kind: str
    name: str
    models_dir: Path | None = None
    dirs: tuple[Path, ...] = ()
    manifest: Path | None = None
    value: float | None = None


@dataclass(frozen=True)
class PipelineConfig:
    canvas: int = 512
    folds: int = 5
    seed: int = 0
    tta_enabled: bool = True
    tta_variants: tuple[TtaVariant, ...] = ALL_VARIANTS
    post: PostprocessConfig = PostprocessConfig()
    schedule: "TrainingSchedule" = None  # type: ignore[assignment]
    loss: LossConfig = LossConfig()
    aug: AugmentationConfig = AugmentationConfig()
    predictors: tuple[PredictorDecl, ...] = ()

    def echo(self) -> dict:
        """Stable dictionary of the values that shape an inference run."""
        return {
            "canvas": self.canvas,
            "folds": self.folds,
            "seed": self.seed,
            "threshold": self.post.threshold,
            "min_object_area": self.post.min_object_area,
            "connectivity": self.post.connectivity,
            "tta_enabled": self.tta_enabled,
            "tta_variants": [
                [v.rotation_quarter_turns, v.hflip] for v in self.tta_variants
            ],
            "predictors": [
                {"kind": p.kind, "name": p.name} for p in self.predictors
            ],
        }


def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown config key(s) in {where}: {', '.join(unknown)}")


def _expect(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _parse_variants(raw, where: str) -> tuple[TtaVariant, ...]:
    if isinstance(raw, str):
        if raw not in _VARIANT_PRESETS:
            raise ConfigError(
                f"{where}: unknown variant preset {raw!r}; "
                f"use one of {sorted(_VARIANT_PRESETS)} or an explicit list"
            )
        return _VARIANT_PRESETS[raw]
    _expect(isinstance(raw, list) and raw, f"{where} must be a non-empty list or a preset name")
    variants = []
    for entry in raw:
        _expect(
            isinstance(entry, list) and len(entry) == 2,
            f"{where} entries must be [rotation_quarter_turns, hflip] pairs",
        )
        rot, flip = entry
        _expect(isinstance(rot, int) and isinstance(flip, bool), f"{where}: bad entry {entry!r}")
        try:
            variants.append(TtaVariant(rot, flip))
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from exc
    return tuple(variants)


def _parse_predictor(entry: dict, base: Path, where: str) -> PredictorDecl:
    _expect(isinstance(entry, dict), f"{where} must be an object")
    kind = entry.get("kind")
    _expect(kind in ("toy", "files", "constant"), f"{where}: kind must be toy, files or constant")
    if kind == "toy":
        _check_keys(entry, {"kind", "name", "models_dir"}, where)
        _expect("models_dir" in entry, f"{where}: toy predictor needs models_dir")
        return PredictorDecl(
            kind="toy",
            name=str(entry.get("name", "toy")),
            models_dir=base / entry["models_dir"],
        )
    if kind == "files":
        _check_keys(entry, {"kind", "name", "dirs", "manifest"}, where)
        _expect(
            isinstance(entry.get("dirs"), list) and entry["dirs"],
            f"{where}: files predictor needs a non-empty dirs list",
        )
        _expect("manifest" in entry, f"{where}: files predictor needs a manifest")
        return PredictorDecl(
            kind="files",
            name=str(entry.get("name", "files")),
            dirs=tuple(base / d for d in entry["dirs"]),
            manifest=base / entry["manifest"],
        )
    _check_keys(entry, {"kind", "name", "value"}, where)
    _expect(isinstance(entry.get("value"), (int, float)), f"{where}: constant predictor needs value")
    return PredictorDecl(
        kind="constant", name=str(entry.get("name", "constant")), value=float(entry["value"])
    )


_TOP_KEYS = {"canvas", "folds", "seed", "tta", "postprocess", "training", "loss",
             "augmentation", "predictors"}


def load_config(path=None) -> PipelineConfig:
    """Parse a config file; None yields the defaults."""
    from .predictor import TrainingSchedule

    if path is None:
        return PipelineConfig(schedule=TrainingSchedule())
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    _expect(isinstance(raw, dict), f"config {path} must hold a JSON object")
    _check_keys(raw, _TOP_KEYS, str(path))
    base = path.parent

    canvas = raw.get("canvas", 512)
    folds = raw.get("folds", 5)
    seed = raw.get("seed", 0)
    _expect(isinstance(canvas, int) and canvas >= 1, "canvas must be a positive integer")
    _expect(isinstance(folds, int) and folds >= 2, "folds must be an integer >= 2")
    _expect(isinstance(seed, int), "seed must be an integer")

    tta_raw = raw.get("tta", {})
    _expect(isinstance(tta_raw, dict), "tta must be an object")
    _check_keys(tta_raw, {"enabled", "variants"}, "tta")
    tta_enabled = tta_raw.get("enabled", True)
    _expect(isinstance(tta_enabled, bool), "tta.enabled must be a boolean")
    variants = (
        _parse_variants(tta_raw["variants"], "tta.variants")
        if "variants" in tta_raw
        else ALL_VARIANTS
    )

    try:
        post = PostprocessConfig(**raw.get("postprocess", {}))
        schedule = TrainingSchedule(**raw.get("training", {}))
        loss = LossConfig(**raw.get("loss", {}))
        aug = AugmentationConfig(**raw.get("augmentation", {}))
    except TypeError as exc:
        raise ConfigError(f"config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"config {path}: {exc}") from exc

    predictors_raw = raw.get("predictors", [])
    _expect(isinstance(predictors_raw, list), "predictors must be a list")
    predictors = tuple(
        _parse_predictor(entry, base, f"predictors[{i}]")
        for i, entry in enumerate(predictors_raw)
    )

    return PipelineConfig(
        canvas=canvas,
        folds=folds,
        seed=seed,
        tta_enabled=tta_enabled,
        tta_variants=variants,
        post=post,
        schedule=schedule,
        loss=loss,
        aug=aug,
        predictors=predictors,
    )


def build_families(config: PipelineConfig) -> list[EnsembleSpec]:
    """Instantiate each declared predictor family."""
    if not config.predictors:
        raise ConfigError("no predictors declared in the config")
    families = []
    for decl in config.predictors:
        if decl.kind == "toy":
            paths = sorted(decl.models_dir.glob("fold_*.json"))
            if not paths:
                raise DataError(f"no fold_*.json models under {decl.models_dir}")
            members = [
                ToyPredictor(ToyModel.load(p), name=f"{decl.name}/{p.stem}") for p in paths
            ]
        elif decl.kind == "files":
            members = [
                load_file_predictor(d, decl.manifest, name=f"{decl.name}/{Path(d).name}")
                for d in decl.dirs
            ]
        else:
            members = [ConstantPredictor(decl.value, name=decl.name)]
        families.append(EnsembleSpec(members=tuple(members), name=decl.name))
    return families
