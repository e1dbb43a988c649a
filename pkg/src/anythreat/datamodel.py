"""Feature schema, labelled instances and the community dataset container."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

GROUPS = ("frequency", "time", "boolean", "attribute", "other")


class Label(str, Enum):
    NORMAL = "Normal"
    ANOMALOUS = "Anomalous"


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple
    groups: tuple

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "groups", tuple(self.groups))
        if not self.names:
            raise ValueError("schema needs at least one feature")
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique")
        if len(self.groups) != len(self.names):
            raise ValueError("one group tag per feature")
        bad = [g for g in self.groups if g not in GROUPS]
        if bad:
            raise ValueError(f"unknown feature groups: {bad}")

    @property
    def m(self) -> int:
        return len(self.names)

    @cached_property
    def fingerprint(self) -> str:
        text = "\n".join(f"{n}:{g}" for n, g in zip(self.names, self.groups))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Instance:
    """One (user, session slot) feature vector.

    ``synthetic`` marks oversampled instances; they keep the parent's user and
    slot so provenance can be traced.
    """

    t: int
    user: str
    x: tuple
    label: Label
    threat_id: Optional[str] = None
    subclass: Optional[int] = None
    synthetic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "label", Label(self.label))
        if (self.threat_id is not None) != (self.label is Label.ANOMALOUS):
            raise ValueError(
                f"threat_id must be set exactly for anomalous instances "
                f"(user={self.user}, t={self.t})")

    @property
    def is_anomalous(self) -> bool:
        return self.label is Label.ANOMALOUS


@dataclass(frozen=True)
class CommunityDataset:
    role: str
    schema: FeatureSchema
    instances: tuple
    slot_hours: int = 4
    normalized: bool = False
    feature_min: Optional[tuple] = None
    feature_max: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        m = self.schema.m
        for inst in self.instances:
            if len(inst.x) != m:
                raise ValueError(
                    f"instance ({inst.user}, {inst.t}) has {len(inst.x)} features, schema has {m}")

    def __len__(self):
        return len(self.instances)

    @cached_property
    def X(self) -> np.ndarray:
        return as_matrix(self.instances, self.schema.m)

    @property
    def n_threats(self) -> int:
        return len({i.threat_id for i in self.instances if i.is_anomalous})

    def with_instances(self, instances: Sequence[Instance]) -> "CommunityDataset":
        return replace(self, instances=tuple(instances))


def as_matrix(instances: Sequence[Instance], m: Optional[int] = None) -> np.ndarray:
    if not instances:
        return np.zeros((0, m or 0))
    return np.array([inst.x for inst in instances], dtype=np.float64)


def split_by_label(d: CommunityDataset):
    """Return (majority, minority): the Normal and Anomalous instances in dataset order."""
    majority = [i for i in d.instances if i.label is Label.NORMAL]
    minority = [i for i in d.instances if i.label is Label.ANOMALOUS]
    return majority, minority


def minmax_fit(X: np.ndarray):
    return X.min(axis=0), X.max(axis=0)


def minmax_apply(X: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = hi - lo
    out = np.zeros_like(X, dtype=np.float64)
    ok = span > 0
    # zero-range features map to 0
    out[:, ok] = (X[:, ok] - lo[ok]) / span[ok]
    return out


def rebuild(instances: Sequence[Instance], X: np.ndarray) -> list:
    return [replace(inst, x=tuple(row)) for inst, row in zip(instances, X.tolist())]


def normalize(d: CommunityDataset) -> CommunityDataset:
    """Min-max scale every feature to [0, 1] over the whole dataset."""
    if not d.instances:
        return replace(d, normalized=True)
    X = d.X
    lo, hi = minmax_fit(X)
    Xn = minmax_apply(X, lo, hi)
    return replace(
        d,
        instances=tuple(rebuild(d.instances, Xn)),
        normalized=True,
        feature_min=tuple(lo.tolist()),
        feature_max=tuple(hi.tolist()),
    )
