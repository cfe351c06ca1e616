"""Run configuration: one JSON document per analysis.

Exactly one of ``family`` or ``perturbation`` drives sampling.  The only
configuration channel besides the document is the RNG seed override
(``--seed`` flag or ``LYAPBOUNDS_SEED``), which keeps runs reproducible
from the config file alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import OverlappingLabels, ValidationError
from .families import MatrixFamily
from .linalg import ShapeMask, mask_and
from .perturbation import PerturbationSpec
from .shapes import ShapeSet


@dataclass
class EstimationParams:
    n: int = 10_000
    replicas: int = 8
    renorm_every: int = 16
    seed: int | None = None

    def __post_init__(self):
        if self.n < 1 or self.replicas < 1 or self.renorm_every < 1:
            raise ValidationError("estimation parameters must be positive")


@dataclass
class Tolerances:
    zero_tol: float = 0.0
    sandwich_tol: float = 1e-9


@dataclass
class AnalysisConfig:
    family: MatrixFamily | None = None
    shape_set: ShapeSet | None = None
    perturbation: PerturbationSpec | None = None
    estimation: EstimationParams = field(default_factory=EstimationParams)
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if (self.family is None) == (self.perturbation is None):
            raise ValidationError("exactly one of family/perturbation must be present")

    def run_seed(self, override: int | None = None) -> int:
        if override is not None:
            return override
        if self.estimation.seed is not None:
            return self.estimation.seed
        source = self.family if self.family is not None else self.perturbation
        return source.seed


def parse_config_text(text: str) -> AnalysisConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> AnalysisConfig:
    if not isinstance(raw, dict):
        raise ValidationError("config root must be a JSON object")
    est = raw.get("estimation", {})
    tol = raw.get("tolerances", {})
    return AnalysisConfig(
        family=MatrixFamily.from_json_dict(raw["family"]) if "family" in raw else None,
        shape_set=ShapeSet.from_json_dict(raw["shape_set"]) if "shape_set" in raw else None,
        perturbation=(
            PerturbationSpec.from_json_dict(raw["perturbation"]) if "perturbation" in raw else None
        ),
        estimation=EstimationParams(
            n=int(est.get("n", 10_000)),
            replicas=int(est.get("replicas", 8)),
            renorm_every=int(est.get("renorm_every", 16)),
            seed=int(est["seed"]) if "seed" in est else None,
        ),
        tolerances=Tolerances(
            zero_tol=float(tol.get("zero_tol", 0.0)),
            sandwich_tol=float(tol.get("sandwich_tol", 1e-9)),
        ),
    )


def load_config(path) -> AnalysisConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


@dataclass
class Check:
    name: str
    status: str  # pass | fail
    detail: str = ""

    def to_json_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "detail": self.detail}


def run_checks(text: str) -> list[Check]:
    """Granular per-invariant validation, continuing past failures."""
    checks: list[Check] = []
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        return [Check("parse", "fail", f"line {exc.lineno}, column {exc.colno}: {exc.msg}")]
    checks.append(Check("parse", "pass"))

    ok = lambda name: checks.append(Check(name, "pass"))
    bad = lambda name, detail: checks.append(Check(name, "fail", detail))

    if ("family" in raw) == ("perturbation" in raw):
        bad("driver", "exactly one of family/perturbation must be present")
    else:
        ok("driver")

    if "family" in raw:
        try:
            fam = MatrixFamily.from_json_dict(raw["family"])
            ok("family")
        except (ValidationError, KeyError, TypeError) as exc:
            fam = None
            bad("family", str(exc))
    else:
        fam = None

    shape = None
    if "shape_set" in raw:
        try:
            dim = int(raw["shape_set"]["dim"])
            masks = [ShapeMask.from_array(np.asarray(l)) for l in raw["shape_set"]["labels"]]
            if any(m.dim != dim for m in masks):
                bad("shape_set.dims", "label dims disagree with declared dim")
            else:
                ok("shape_set.dims")
            zero = [i for i, m in enumerate(masks) if m.is_zero()]
            if zero:
                bad("shape_set.nonzero", f"zero labels at 1-based positions {[i + 1 for i in zero]}")
            else:
                ok("shape_set.nonzero")
            overlap = None
            for i in range(len(masks)):
                for j in range(i + 1, len(masks)):
                    if not mask_and(masks[i], masks[j]).is_zero():
                        overlap = (i, j)
                        break
                if overlap:
                    break
            if overlap:
                bad("shape_set.disjoint", str(OverlappingLabels(*overlap)))
            else:
                ok("shape_set.disjoint")
                if not zero and all(m.dim == dim for m in masks):
                    shape = ShapeSet(dim, tuple(masks))
        except (ValidationError, KeyError, TypeError, ValueError) as exc:
            bad("shape_set", str(exc))

    if fam is not None and shape is not None:
        if fam.dim != shape.dim:
            bad("family_vs_shape_set", f"family dim {fam.dim} != shape set dim {shape.dim}")
        else:
            ok("family_vs_shape_set")

    if "perturbation" in raw:
        try:
            PerturbationSpec.from_json_dict(raw["perturbation"])
            ok("perturbation")
        except (ValidationError, KeyError, TypeError) as exc:
            bad("perturbation", str(exc))

    try:
        est = raw.get("estimation", {})
        EstimationParams(
            n=int(est.get("n", 10_000)),
            replicas=int(est.get("replicas", 8)),
            renorm_every=int(est.get("renorm_every", 16)),
            seed=int(est["seed"]) if "seed" in est else None,
        )
        ok("estimation")
    except (ValidationError, TypeError, ValueError) as exc:
        bad("estimation", str(exc))
    return checks
