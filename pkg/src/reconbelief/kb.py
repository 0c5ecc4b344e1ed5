"""Knowledge base of conditional feature likelihoods.

Tables hold ``Pr(feature = value | os)`` and ``Pr(feature = value | software)``.
Within one observation features are treated as conditionally independent, so
the likelihood of an observation under a configuration is a product of table
entries: one per observed OS feature, and, for every installed software
package, one per observed software feature.
"""
from __future__ import annotations

import enum
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from . import _documents
from .errors import EmptyCorpus, SchemaViolation, UnknownLabel, ValidationError
from .spaces import Configuration, NodeIdentity

logger = logging.getLogger(__name__)

ROW_TOL = 1e-9

Table = dict[str, dict[str, dict[str, float]]]


class LabelKind(str, enum.Enum):
    OS = "os"
    SOFTWARE = "software"


@dataclass(frozen=True)
class FeatureSchema:
    """Feature names for OS and software fingerprinting plus their discrete domains."""

    os_features: tuple[str, ...]
    software_features: tuple[str, ...]
    domains: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        os_f, sw_f = tuple(self.os_features), tuple(self.software_features)
        for name, feats in (("os_features", os_f), ("software_features", sw_f)):
            if len(set(feats)) != len(feats):
                raise ValidationError(f"{name} has duplicates")
        overlap = set(os_f) & set(sw_f)
        if overlap:
            raise ValidationError(f"features listed as both OS and software: {sorted(overlap)}")
        domains = {}
        for f in os_f + sw_f:
            if f not in self.domains:
                raise ValidationError(f"feature {f!r} has no domain")
            dom = tuple(str(v) for v in self.domains[f])
            if not dom:
                raise ValidationError(f"feature {f!r} has an empty domain")
            if len(set(dom)) != len(dom):
                raise ValidationError(f"domain of {f!r} has duplicates")
            domains[f] = dom
        extra = set(self.domains) - set(domains)
        if extra:
            raise ValidationError(f"domains given for undeclared features: {sorted(extra)}")
        object.__setattr__(self, "os_features", os_f)
        object.__setattr__(self, "software_features", sw_f)
        object.__setattr__(self, "domains", domains)

    @property
    def features(self) -> tuple[str, ...]:
        return self.os_features + self.software_features

    def validate_values(self, values: Mapping[str, str]) -> None:
        for f, v in values.items():
            dom = self.domains.get(f)
            if dom is None:
                raise SchemaViolation(f"unknown feature {f!r}")
            if v not in dom:
                raise SchemaViolation(f"value {v!r} is not in the domain of {f!r} {list(dom)}")

    def to_dict(self) -> dict:
        return {
            "version": _documents.VERSION,
            "os_features": list(self.os_features),
            "software_features": list(self.software_features),
            "domains": {f: list(d) for f, d in self.domains.items()},
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "FeatureSchema":
        _documents.check_document(doc, "feature schema", ["os_features", "software_features", "domains"])
        return cls(tuple(doc["os_features"]), tuple(doc["software_features"]), dict(doc["domains"]))

    def dumps(self) -> str:
        return _documents.dump_json(self.to_dict())

    @classmethod
    def loads(cls, text: str | bytes) -> "FeatureSchema":
        return cls.from_dict(_documents.parse_json(text, "feature schema"))


@dataclass(frozen=True)
class Observation:
    """One passive fingerprint sample: observed feature values, keyed by feature name.

    Features that were not seen are simply absent.
    """

    values: Mapping[str, str]
    node: NodeIdentity | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", {str(k): str(v) for k, v in self.values.items()})

    def __hash__(self):
        return hash((tuple(sorted(self.values.items())), self.node))


@dataclass(frozen=True)
class KnowledgeBase:
    schema: FeatureSchema
    os_tables: Table
    software_tables: Table = field(default_factory=dict)
    alpha: float = 1.0

    def __post_init__(self):
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ValidationError("alpha must be a finite pseudocount >= 0")
        object.__setattr__(self, "os_tables", _check_tables(self.os_tables, self.schema.os_features, self.schema, "OS"))
        object.__setattr__(
            self, "software_tables",
            _check_tables(self.software_tables, self.schema.software_features, self.schema, "software"),
        )

    @property
    def os_labels(self) -> tuple[str, ...]:
        return tuple(self.os_tables)

    @property
    def software_labels(self) -> tuple[str, ...]:
        return tuple(self.software_tables)

    def _row(self, tables: Table, label: str, feature: str, kind: str) -> Mapping[str, float]:
        rows = tables.get(label)
        if rows is None:
            if self.alpha > 0:
                # smoothing of an empty count row is the uniform distribution
                dom = self.schema.domains[feature]
                return dict.fromkeys(dom, 1.0 / len(dom))
            raise UnknownLabel(f"no {kind} table for {label!r} and alpha=0 cannot synthesize one")
        return rows[feature]

    def os_probability(self, os: str, feature: str, value: str) -> float:
        return self._row(self.os_tables, os, feature, "OS")[value]

    def software_probability(self, software: str, feature: str, value: str) -> float:
        return self._row(self.software_tables, software, feature, "software")[value]

    def has_exact_zeros(self) -> bool:
        return any(
            p == 0.0
            for tables in (self.os_tables, self.software_tables)
            for rows in tables.values()
            for row in rows.values()
            for p in row.values()
        )

    def likelihood(self, observation: Observation, config: Configuration) -> float:
        return observation_likelihood(self, observation, config)

    def log_likelihood(self, observation: Observation, config: Configuration) -> float:
        return log_likelihood(self, observation, config)

    # serialization

    def to_dict(self) -> dict:
        return {
            "version": _documents.VERSION,
            "schema": self.schema.to_dict(),
            "alpha": self.alpha,
            "os_tables": self.os_tables,
            "software_tables": self.software_tables,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "KnowledgeBase":
        _documents.check_document(doc, "knowledge base", ["schema", "alpha", "os_tables", "software_tables"])
        return cls(FeatureSchema.from_dict(doc["schema"]), doc["os_tables"], doc["software_tables"], float(doc["alpha"]))

    def dumps(self) -> str:
        return _documents.dump_json(self.to_dict())

    @classmethod
    def loads(cls, text: str | bytes) -> "KnowledgeBase":
        return cls.from_dict(_documents.parse_json(text, "knowledge base"))


def _check_tables(tables: Mapping, features: Sequence[str], schema: FeatureSchema, kind: str) -> Table:
    out: Table = {}
    for label, rows in tables.items():
        if set(rows) != set(features):
            raise ValidationError(f"{kind} table for {label!r} must cover exactly the features {list(features)}")
        out[label] = {}
        for f in features:
            row = {str(v): p for v, p in rows[f].items()}
            dom = schema.domains[f]
            if set(row) != set(dom):
                raise ValidationError(f"{kind} row ({label!r}, {f!r}) must cover exactly the domain {list(dom)}")
            for v, p in row.items():
                if isinstance(p, bool) or not isinstance(p, (int, float)) or not (0.0 <= p <= 1.0):
                    raise ValidationError(f"{kind} entry ({label!r}, {f!r}, {v!r}) = {p!r} is not a probability")
            total = math.fsum(row.values())
            if abs(total - 1.0) > ROW_TOL:
                raise ValidationError(f"{kind} row ({label!r}, {f!r}) sums to {total!r}, not 1")
            out[label][f] = {v: float(row[v]) for v in dom}
    return out


def estimate_kb(
    records: Iterable[tuple[LabelKind | str, str, Observation]],
    schema: FeatureSchema,
    alpha: float = 1.0,
    *,
    os_labels: Iterable[str] = (),
    software_labels: Iterable[str] = (),
) -> KnowledgeBase:
    """Estimate Laplace-smoothed likelihood tables from labelled observations.

    Each entry is ``(count(label, f, v) + alpha) / (count(label, f, .) + alpha * |domain(f)|)``.
    A row with no counts falls back to the uniform distribution. Labels that
    should get tables without appearing in ``records`` can be listed in
    ``os_labels`` / ``software_labels``.

    An OS record only counts its OS features and a software record only its
    software features; other features in the sample are ignored.
    """
    if alpha < 0:
        raise ValidationError("alpha must be >= 0")
    counts: dict[LabelKind, dict[str, Counter]] = {LabelKind.OS: {}, LabelKind.SOFTWARE: {}}
    for label in os_labels:
        counts[LabelKind.OS].setdefault(label, Counter())
    for label in software_labels:
        counts[LabelKind.SOFTWARE].setdefault(label, Counter())
    n_records = 0
    for i, (kind, label, obs) in enumerate(records):
        try:
            kind = LabelKind(kind)
        except ValueError:
            raise SchemaViolation(f"record {i}: label kind must be 'os' or 'software', got {kind!r}") from None
        try:
            schema.validate_values(obs.values)
        except SchemaViolation as exc:
            raise SchemaViolation(f"record {i} ({label}): {exc}") from None
        feats = schema.os_features if kind is LabelKind.OS else schema.software_features
        c = counts[kind].setdefault(label, Counter())
        for f in feats:
            if f in obs.values:
                c[f, obs.values[f]] += 1
        n_records += 1
    if n_records == 0:
        raise EmptyCorpus("no training records")

    def build(kind: LabelKind, feats: Sequence[str]) -> Table:
        tables: Table = {}
        for label, c in counts[kind].items():
            tables[label] = {}
            for f in feats:
                dom = schema.domains[f]
                total = sum(c[f, v] for v in dom)
                denom = total + alpha * len(dom)
                if denom == 0:
                    tables[label][f] = dict.fromkeys(dom, 1.0 / len(dom))
                else:
                    tables[label][f] = {v: (c[f, v] + alpha) / denom for v in dom}
        return tables

    kb = KnowledgeBase(schema, build(LabelKind.OS, schema.os_features),
                       build(LabelKind.SOFTWARE, schema.software_features), alpha)
    if kb.has_exact_zeros():
        logger.warning("knowledge base contains exact zero probabilities (alpha=%s)", alpha)
    return kb


def _factors(kb: KnowledgeBase, observation: Observation, config: Configuration) -> list[float]:
    values = observation.values
    kb.schema.validate_values(values)
    factors = [kb.os_probability(config.os, f, values[f]) for f in kb.schema.os_features if f in values]
    sw_feats = [f for f in kb.schema.software_features if f in values]
    if sw_feats:
        for s in sorted(config.software):
            factors.extend(kb.software_probability(s, f, values[f]) for f in sw_feats)
    return factors


def observation_likelihood(kb: KnowledgeBase, observation: Observation, config: Configuration) -> float:
    """``Pr(observation | config)`` as a direct product of table entries.

    Absent features and an empty software set contribute a factor of 1.
    """
    return math.prod(_factors(kb, observation, config))


def log_likelihood(kb: KnowledgeBase, observation: Observation, config: Configuration) -> float:
    """Natural log of :func:`observation_likelihood`, summed factor by factor.

    Returns ``-inf`` when some factor is an exact zero (possible only with alpha=0).
    """
    total = 0.0
    for p in _factors(kb, observation, config):
        if p == 0.0:
            return -math.inf
        total += math.log(p)
    return total
