"""JSON configuration documents -> problem instances.

Sections: ``space`` (u, x0), ``operatorA`` (matrix, optional gamma),
``family`` (maps, p, optional tau), ``schedule``, ``bounds-overrides``,
``run``, ``verify`` and ``oracle``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import numpy as np

from .engine import ProblemInstance
from .hilbert import SpdOperator
from .meta import Counterfunction
from .nonexp import (AffineProjection, BallProjection, BoxProjection, Composite, CyclicFamily,
                     HalfspaceProjection, Identity, NonexpansiveOp)
from .ratekit import DEFAULT_CAP
from .sched import Schedule, example_schedule, inverse_sqrt_schedule, tabulated_schedule

SECTIONS = {"space", "operatorA", "family", "schedule", "bounds-overrides", "run", "verify", "oracle", "name"}


class ConfigError(ValueError):
    pass


def _need(doc: dict, key: str, where: str):
    if not isinstance(doc, dict) or key not in doc:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return doc[key]


def parse_map(spec: dict, dim: int) -> NonexpansiveOp:
    kind = _need(spec, "kind", "family.maps[]")
    if kind == "identity":
        return Identity(dim)
    if kind == "halfspace":
        return HalfspaceProjection(_need(spec, "a", "halfspace"), _need(spec, "b", "halfspace"))
    if kind == "ball":
        return BallProjection(_need(spec, "center", "ball"), _need(spec, "radius", "ball"))
    if kind == "box":
        lo = [(-np.inf if v is None else v) for v in _need(spec, "lo", "box")]
        hi = [(np.inf if v is None else v) for v in _need(spec, "hi", "box")]
        return BoxProjection(lo, hi)
    if kind == "affine":
        return AffineProjection(_need(spec, "basis", "affine"), _need(spec, "offset", "affine"))
    if kind == "composite":
        return Composite([parse_map(s, dim) for s in _need(spec, "ops", "composite")])
    raise ConfigError(f"unknown map kind {kind!r}")


def parse_tau(spec):
    if spec is None:
        return None
    cf = Counterfunction.from_config(spec)
    return lambda k: cf.tilde(k).value


def parse_schedule(spec: dict, l: int, gamma_A) -> Schedule:
    kind = _need(spec, "kind", "schedule")
    sl = int(spec.get("l", l))
    if sl != l:
        raise ConfigError(f"schedule.l={sl} differs from the number of maps {l}")
    gamma = spec.get("gamma", None)
    if kind == "example":
        return example_schedule(_fraction(gamma if gamma is not None else gamma_A), l)
    if kind == "inverse-sqrt":
        return inverse_sqrt_schedule(_fraction(gamma if gamma is not None else gamma_A), l)
    if kind == "custom":
        tables = {k: spec.get(k) for k in ("sigma1", "sigma2", "sigma2star", "sigma3", "sigma4")}
        return tabulated_schedule(_need(spec, "alpha", "schedule"), l,
                                  gamma=_fraction(gamma) if gamma is not None else gamma_A, **tables)
    raise ConfigError(f"unknown schedule kind {kind!r}")


def _fraction(v) -> Fraction:
    """Exact rational from a JSON number or a string such as ``"1/3"``."""
    if isinstance(v, (Fraction, int, str)):
        return Fraction(v)
    return Fraction(str(v))


@dataclass
class Config:
    doc: dict
    instance: ProblemInstance

    @property
    def run(self) -> dict:
        return self.doc.get("run", {})

    @property
    def verify(self) -> dict:
        return self.doc.get("verify", {})

    @property
    def oracle(self) -> dict | None:
        return self.doc.get("oracle")


def build(doc: Any, cap: int = DEFAULT_CAP) -> Config:
    """Validate a configuration document and assemble the instance."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(doc) - SECTIONS
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")
    try:
        space = _need(doc, "space", "config")
        opA = _need(doc, "operatorA", "config")
        A = SpdOperator.from_matrix(_need(opA, "matrix", "operatorA"),
                                    _fraction(opA["gamma"]) if opA.get("gamma") is not None else None)
        dim = A.dim
        if "dim" in space and int(space["dim"]) != dim:
            raise ConfigError(f"space.dim={space['dim']} but operatorA is {dim}x{dim}")
        fam_doc = _need(doc, "family", "config")
        maps = [parse_map(m, dim) for m in _need(fam_doc, "maps", "family")]
        family = CyclicFamily(maps, _need(fam_doc, "p", "family"), tau=parse_tau(fam_doc.get("tau")))
        schedule = parse_schedule(_need(doc, "schedule", "config"), family.l, A.gamma)
        overrides = doc.get("bounds-overrides", {}) or {}
        inst = ProblemInstance(A, _need(space, "u", "space"), family, schedule,
                               space.get("x0", [0.0] * dim), overrides=dict(overrides), cap=cap,
                               name=str(doc.get("name", "")))
        if schedule.sigma1 is not None:
            inst.bounds  # surfaces bad overrides and gamma mismatches now
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return Config(doc, inst)


def load(path: str, cap: int = DEFAULT_CAP) -> Config:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return build(doc, cap)
