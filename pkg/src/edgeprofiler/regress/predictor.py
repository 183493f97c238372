"""Bundled cost predictors: a fitted model plus its normalization stats.

A CostModel owns everything needed to go from raw feature vectors to a
prediction in target units, and serializes to a JSON model file that
embeds the normalization stats and the feature-schema version.  Loading
a file written under a different schema version fails loudly.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .features import (
    SCHEMA_VERSION,
    TARGET_NAMES,
    NormalizationStats,
    denormalize_target,
    normalize_features,
)
from .gbdt import GradientBoostedEnsemble
from .mlp import MLPRegressor


class SchemaMismatchError(ValueError):
    """Model file was written under an incompatible feature schema."""


@dataclass(frozen=True, eq=False)
class CostModel:
    """A trained predictor for one target, with its input pipeline."""

    kind: str  # "gbdt" | "mlp"
    target: str
    stats: NormalizationStats
    model: GradientBoostedEnsemble | MLPRegressor
    schema_version: int = SCHEMA_VERSION
    provenance: str = "centralized"

    def __post_init__(self) -> None:
        if self.kind not in ("gbdt", "mlp"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.target not in TARGET_NAMES:
            raise ValueError(f"unknown target {self.target!r}")

    def predict_raw(self, features: np.ndarray) -> np.ndarray:
        """Predict in target units from raw (unnormalized) features."""
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        xn = normalize_features(x, self.stats)
        yn = self.model.predict(xn)
        return denormalize_target(yn, self.stats, self.target)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "kind": self.kind,
            "target": self.target,
            "provenance": self.provenance,
            "normalization": self.stats.to_dict(),
            "model": self.model.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "CostModel":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaMismatchError(
                f"model file schema {version!r} differs from {SCHEMA_VERSION}")
        kind = d["kind"]
        model_cls = GradientBoostedEnsemble if kind == "gbdt" else MLPRegressor
        return CostModel(
            kind=kind, target=d["target"],
            stats=NormalizationStats.from_dict(d["normalization"]),
            model=model_cls.from_dict(d["model"]),
            schema_version=version,
            provenance=d.get("provenance", "centralized"),
        )


def save_model(model: CostModel, path: str) -> None:
    """Write the model file atomically (temp file then rename)."""
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(model.to_dict(), fh)
    os.replace(tmp, path)


def load_model(path: str) -> CostModel:
    with open(path) as fh:
        return CostModel.from_dict(json.load(fh))
