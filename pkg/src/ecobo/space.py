"""Hyperparameter search spaces and their unit-cube encoding.

The optimizer and the surrogate models work exclusively on the unit
hypercube; this module owns the bijection between user-facing parameter
values (floats, ints, category labels) and ``[0, 1]^dim`` vectors.

Categorical parameters occupy a single normalized-index dimension,
``(i + 0.5) / k`` for category ``i`` of ``k``. This keeps the cube small
but imposes an artificial ordering on the categories; see README
"Limitations".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import qmc

KINDS = ("continuous", "integer", "categorical")
SCALES = ("linear", "log")


class SpaceError(ValueError):
    """Invalid parameter definition, value, or unit-cube vector."""


@dataclass(frozen=True)
class ParamSpec:
    """One tunable parameter: numeric range or category list.

    ``scale="log"`` maps the parameter through its logarithm before
    normalizing, and requires strictly positive bounds.
    """

    name: str
    kind: str
    low: float | None = None
    high: float | None = None
    categories: tuple[Any, ...] | None = None
    scale: str = "linear"

    def __post_init__(self):
        if not self.name:
            raise SpaceError("parameter name must be non-empty")
        if self.kind not in KINDS:
            raise SpaceError(f"{self.name}: unknown kind {self.kind!r}")
        if self.scale not in SCALES:
            raise SpaceError(f"{self.name}: unknown scale {self.scale!r}")
        if self.kind == "categorical":
            if not self.categories:
                raise SpaceError(f"{self.name}: categorical needs a non-empty category list")
            object.__setattr__(self, "categories", tuple(self.categories))
            if len(set(map(repr, self.categories))) != len(self.categories):
                raise SpaceError(f"{self.name}: duplicate categories")
            if self.low is not None or self.high is not None:
                raise SpaceError(f"{self.name}: categorical takes no bounds")
        else:
            if self.low is None or self.high is None:
                raise SpaceError(f"{self.name}: {self.kind} needs low and high bounds")
            if not (math.isfinite(self.low) and math.isfinite(self.high)):
                raise SpaceError(f"{self.name}: bounds must be finite")
            if not self.low < self.high:
                raise SpaceError(f"{self.name}: low must be < high")
            if self.scale == "log" and self.low <= 0:
                raise SpaceError(f"{self.name}: log scale requires low > 0")
            if self.kind == "integer" and (int(self.low) != self.low or int(self.high) != self.high):
                raise SpaceError(f"{self.name}: integer bounds must be whole numbers")

    # -- single-parameter encode/decode ------------------------------------

    def encode_value(self, value: Any) -> float:
        """Map a raw value into [0, 1]."""
        if self.kind == "categorical":
            try:
                i = self.categories.index(value)
            except ValueError:
                raise SpaceError(f"{self.name}: {value!r} is not one of {self.categories}") from None
            return (i + 0.5) / len(self.categories)

        try:
            v = float(value)
        except (TypeError, ValueError):
            raise SpaceError(f"{self.name}: non-numeric value {value!r}") from None
        if not math.isfinite(v):
            raise SpaceError(f"{self.name}: non-finite value {value!r}")
        if self.scale == "log" and v <= 0:
            raise SpaceError(f"{self.name}: log-scale parameter got non-positive value {v}")
        if not (self.low <= v <= self.high):
            raise SpaceError(f"{self.name}: value {v} outside [{self.low}, {self.high}]")
        if self.scale == "log":
            return (math.log(v) - math.log(self.low)) / (math.log(self.high) - math.log(self.low))
        return (v - self.low) / (self.high - self.low)

    def decode_unit(self, u: float) -> Any:
        """Map a unit-interval coordinate back to a raw value."""
        if not 0.0 <= u <= 1.0:
            raise SpaceError(f"{self.name}: unit coordinate {u} outside [0, 1]")
        if self.kind == "categorical":
            k = len(self.categories)
            return self.categories[min(int(u * k), k - 1)]
        if self.scale == "log":
            v = math.exp(math.log(self.low) + u * (math.log(self.high) - math.log(self.low)))
        else:
            v = self.low + u * (self.high - self.low)
        if self.kind == "integer":
            return int(min(max(round(v), self.low), self.high))
        return v


@dataclass(frozen=True)
class SearchSpace:
    """Ordered collection of parameters; one cube dimension per parameter."""

    params: tuple[ParamSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        if not self.params:
            raise SpaceError("search space must contain at least one parameter")
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise SpaceError("duplicate parameter names")

    @property
    def dim(self) -> int:
        return len(self.params)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]


def encode(space: SearchSpace, values: Mapping[str, Any]) -> np.ndarray:
    """Encode named parameter values as a unit-cube vector.

    Every parameter must be present; unknown names are rejected.
    """
    unknown = set(values) - set(space.names)
    if unknown:
        raise SpaceError(f"unknown parameter name(s): {sorted(unknown)}")
    missing = set(space.names) - set(values)
    if missing:
        raise SpaceError(f"missing parameter value(s): {sorted(missing)}")
    return np.array([p.encode_value(values[p.name]) for p in space.params], dtype=float)


def decode(space: SearchSpace, u: Sequence[float]) -> dict[str, Any]:
    """Decode a unit-cube vector to named parameter values.

    Inverse of :func:`encode` up to integer rounding and float roundoff.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (space.dim,):
        raise SpaceError(f"expected vector of dim {space.dim}, got shape {u.shape}")
    return {p.name: p.decode_unit(float(ui)) for p, ui in zip(space.params, u)}


def sample(space: SearchSpace, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` points of a seeded scrambled Sobol sequence in the cube.

    Pure: no global RNG state. The first m points for a given seed are a
    prefix of any longer draw (the engine draws the next power of two and
    slices), so callers can treat the result as a deterministic sequence.
    """
    if n < 1:
        raise SpaceError("n must be >= 1")
    engine = qmc.Sobol(d=space.dim, scramble=True, seed=np.random.default_rng(seed))
    m = 1 << max(0, (n - 1)).bit_length()  # next power of two >= n
    return engine.random(m)[:n]


# -- config-file representation ---------------------------------------------

def param_from_config(obj: Mapping[str, Any]) -> ParamSpec:
    """Build a ParamSpec from one JSON object {name, kind, low, high | categories, scale}."""
    if not isinstance(obj, Mapping):
        raise SpaceError(f"parameter entry must be an object, got {type(obj).__name__}")
    allowed = {"name", "kind", "low", "high", "categories", "scale"}
    extra = set(obj) - allowed
    if extra:
        raise SpaceError(f"unknown key(s) in parameter entry: {sorted(extra)}")
    cats = obj.get("categories")
    return ParamSpec(
        name=obj.get("name", ""),
        kind=obj.get("kind", ""),
        low=obj.get("low"),
        high=obj.get("high"),
        categories=tuple(cats) if cats is not None else None,
        scale=obj.get("scale", "linear"),
    )


def space_from_config(entries: Iterable[Mapping[str, Any]]) -> SearchSpace:
    """Build a SearchSpace from the config-file JSON array."""
    return SearchSpace(params=tuple(param_from_config(e) for e in entries))


def space_to_config(space: SearchSpace) -> list[dict[str, Any]]:
    """Inverse of :func:`space_from_config`, for snapshots and traces."""
    out = []
    for p in space.params:
        entry: dict[str, Any] = {"name": p.name, "kind": p.kind}
        if p.kind == "categorical":
            entry["categories"] = list(p.categories)
        else:
            entry["low"] = p.low
            entry["high"] = p.high
            entry["scale"] = p.scale
        out.append(entry)
    return out
