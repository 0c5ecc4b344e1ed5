"""Replay observation streams against ground truth and report convergence.

For every node the runner folds the stream into a belief trajectory and
records the final mass on the true configuration, the number of
observations needed before that mass first reaches a threshold, and whether
the MAP estimate is correct.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import _documents
from .engine import BeliefTrajectory, DependencyModel, chain_rule_prior, map_estimate, update_stream
from .errors import DocumentError, DomainViolation, ReconBeliefError, UnknownNode, ValidationError
from .ingest import IngestConfig, ParseReport, parse_stream
from .kb import FeatureSchema, KnowledgeBase, Observation
from .spaces import Belief, Configuration, ConfigurationSpace, NodeIdentity, uniform_belief

DEFAULT_THRESHOLD = 0.9

Streams = Mapping[NodeIdentity, Sequence[Observation]]


@dataclass(frozen=True)
class GroundTruth:
    per_node: Mapping[NodeIdentity, Configuration]

    def __post_init__(self):
        object.__setattr__(self, "per_node", dict(self.per_node))

    def validate(self, spaces: Mapping[NodeIdentity, ConfigurationSpace]) -> None:
        for node, config in self.per_node.items():
            if node in spaces:
                spaces[node].validate(config)


@dataclass(frozen=True)
class NodeResult:
    trajectory: BeliefTrajectory
    truth: Configuration
    truth_probability: float
    obs_to_threshold: int | None
    map_correct: bool

    @property
    def obs_to_threshold_text(self) -> str:
        return "never" if self.obs_to_threshold is None else str(self.obs_to_threshold)


@dataclass(frozen=True)
class ScenarioReport:
    per_node: Mapping[NodeIdentity, NodeResult]
    threshold: float = DEFAULT_THRESHOLD

    def summary_lines(self) -> list[str]:
        return [
            f"{node} {r.truth_probability:.4f} {r.obs_to_threshold_text} {str(r.map_correct).lower()}"
            for node, r in self.per_node.items()
        ]


def first_crossing(trajectory: BeliefTrajectory, truth: Configuration, threshold: float) -> int | None:
    """Smallest step index whose mass on ``truth`` is >= ``threshold``."""
    for i, b in trajectory.steps:
        if b.mass(truth) >= threshold:
            return i
    return None


def run_scenario(kb: KnowledgeBase, streams: Streams, priors: Mapping[NodeIdentity, Belief],
                 truth: GroundTruth, threshold: float = DEFAULT_THRESHOLD) -> ScenarioReport:
    """Run the per-node updates and score them against ground truth.

    Nodes appear in the report in stream order; nodes that have a truth
    entry but no observations follow, with prior-only trajectories.
    """
    if not 0 < threshold <= 1:
        raise ValidationError("threshold must lie in (0, 1]")
    nodes = list(streams) + [n for n in truth.per_node if n not in streams]
    results = {}
    for node in nodes:
        if node not in priors:
            raise UnknownNode(f"node {node}: no prior")
        if node not in truth.per_node:
            raise UnknownNode(f"node {node}: no ground truth")
        prior = priors[node]
        gt = truth.per_node[node]
        try:
            prior.space.validate(gt)
            traj = update_stream(prior, streams.get(node, ()), kb)
        except ReconBeliefError as exc:
            raise type(exc)(f"node {node}: {exc}") from exc
        final = traj.final
        results[node] = NodeResult(
            trajectory=traj,
            truth=gt,
            truth_probability=final.mass(gt),
            obs_to_threshold=first_crossing(traj, gt, threshold),
            map_correct=map_estimate(final).configuration == gt,
        )
    return ScenarioReport(results, threshold)


# deception


@dataclass(frozen=True)
class DeceptionRule:
    """Replace ``feature`` values in ``match`` (any value if empty) by ``replace``
    with probability ``probability``."""

    feature: str
    replace: str
    match: frozenset[str] = frozenset()
    probability: float = 1.0

    def __post_init__(self):
        if isinstance(self.match, str):
            object.__setattr__(self, "match", frozenset([self.match]))
        else:
            object.__setattr__(self, "match", frozenset(str(m) for m in self.match))
        object.__setattr__(self, "replace", str(self.replace))
        if not 0.0 <= self.probability <= 1.0:
            raise ValidationError("rule probability must lie in [0, 1]")

    def matches(self, values: Mapping[str, str]) -> bool:
        v = values.get(self.feature)
        return v is not None and (not self.match or v in self.match)


@dataclass(frozen=True)
class DeceptionRewrite:
    rules: tuple[DeceptionRule, ...]
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))

    def validate(self, schema: FeatureSchema) -> None:
        for r in self.rules:
            dom = schema.domains.get(r.feature)
            if dom is None:
                raise DomainViolation(f"rule targets unknown feature {r.feature!r}")
            if r.replace not in dom:
                raise DomainViolation(f"replacement {r.replace!r} is outside the domain of {r.feature!r}")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "rules": [
                {"feature": r.feature, "match": sorted(r.match), "replace": r.replace, "probability": r.probability}
                for r in self.rules
            ],
        }

    @classmethod
    def from_dict(cls, doc: Mapping, seed: int | None = None) -> "DeceptionRewrite":
        rules = []
        for r in doc.get("rules", []):
            extra = set(r) - {"feature", "match", "replace", "probability"}
            if extra:
                raise ValidationError(f"deception rule has unknown keys: {sorted(extra)}")
            rules.append(DeceptionRule(r["feature"], r["replace"], r.get("match", ()), float(r.get("probability", 1.0))))
        return cls(tuple(rules), int(doc.get("seed", 0) if seed is None else seed))


def apply_deception(streams: Streams, rewrite: DeceptionRewrite, schema: FeatureSchema) -> dict[NodeIdentity, list[Observation]]:
    """Rewrite matching feature values to emulate fingerprint obfuscation.

    Every rule draws from its own generator spawned from ``rewrite.seed``,
    one draw per matching value, so results are reproducible and adding a
    rule does not reshuffle the others.
    """
    rewrite.validate(schema)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(rewrite.seed).spawn(len(rewrite.rules))]
    out = {}
    for node, stream in streams.items():
        new = []
        for obs in stream:
            values = dict(obs.values)
            for rule, rng in zip(rewrite.rules, rngs):
                if rule.matches(values) and rule.probability > 0 and rng.random() < rule.probability:
                    values[rule.feature] = rule.replace
            new.append(Observation(values, obs.node))
        out[node] = new
    return out


# reports


def format_probability(p: float) -> str:
    """Four decimal places with trailing zeros dropped: ``1``, ``0.912``, ``0.3333``."""
    s = f"{p:.4f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _csv(rows: list[list]) -> bytes:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue().encode("utf-8")


def trajectory_artifact_name(node: NodeIdentity) -> str:
    return f"trajectory_{node.primary.replace(':', '-')}.csv"


def _config_doc(c: Configuration) -> dict:
    return {"os": c.os, "software": sorted(c.software)}


def report_to_dict(report: ScenarioReport) -> dict:
    nodes = []
    for node, r in report.per_node.items():
        m = map_estimate(r.trajectory.final)
        nodes.append({
            "node": node.primary,
            "addresses": list(node.addresses),
            "truth": _config_doc(r.truth),
            "truth_probability": r.truth_probability,
            "obs_to_threshold": r.obs_to_threshold if r.obs_to_threshold is not None else "never",
            "map": {**_config_doc(m.configuration), "probability": m.probability, "tie": m.tie},
            "map_correct": r.map_correct,
            "rejected_observations": list(r.trajectory.rejected),
            "trajectory": [
                {"obs_index": i, "mass": {c.label: p for c, p in b.items()}} for i, b in r.trajectory.steps
            ],
        })
    return {"version": _documents.VERSION, "threshold": report.threshold, "nodes": nodes}


def emit_report(report: ScenarioReport, format: str = "csv", wide: bool = False) -> dict[str, bytes]:
    """Render a report as named artifacts.

    CSV gives ``prob.csv`` (``node,gt,prob``), ``num.csv`` (``node,gt,num``)
    and one trajectory file per node, long form unless ``wide``. JSON gives
    a single ``report.json``.
    """
    if format == "json":
        return {"report.json": (json.dumps(report_to_dict(report), indent=2) + "\n").encode("utf-8")}
    if format != "csv":
        raise ValidationError(f"unknown report format {format!r}")
    prob = [["node", "gt", "prob"]]
    num = [["node", "gt", "num"]]
    out = {}
    for node, r in report.per_node.items():
        prob.append([node.primary, 1, format_probability(r.truth_probability)])
        num.append([node.primary, 1, r.obs_to_threshold_text])
    out["prob.csv"] = _csv(prob)
    out["num.csv"] = _csv(num)
    for node, r in report.per_node.items():
        out[trajectory_artifact_name(node)] = r.trajectory.to_csv(wide=wide, fmt=format_probability).encode("utf-8")
    return out


REPORT_JSON_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["version", "threshold", "nodes"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": 1},
        "threshold": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["node", "addresses", "truth", "truth_probability", "obs_to_threshold",
                             "map", "map_correct", "rejected_observations", "trajectory"],
                "properties": {
                    "node": {"type": "string"},
                    "addresses": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                    "truth": {"$ref": "#/$defs/configuration"},
                    "truth_probability": {"type": "number", "minimum": 0, "maximum": 1},
                    "obs_to_threshold": {"oneOf": [{"type": "integer", "minimum": 0}, {"const": "never"}]},
                    "map": {
                        "allOf": [{"$ref": "#/$defs/configuration"}],
                        "required": ["probability", "tie"],
                        "properties": {"probability": {"type": "number"}, "tie": {"type": "boolean"}},
                    },
                    "map_correct": {"type": "boolean"},
                    "rejected_observations": {"type": "array", "items": {"type": "integer"}},
                    "trajectory": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": ["obs_index", "mass"],
                            "properties": {
                                "obs_index": {"type": "integer", "minimum": 0},
                                "mass": {"type": "object", "additionalProperties": {"type": "number"}},
                            },
                        },
                    },
                },
            },
        },
    },
    "$defs": {
        "configuration": {
            "type": "object",
            "required": ["os", "software"],
            "properties": {"os": {"type": "string"}, "software": {"type": "array", "items": {"type": "string"}}},
        }
    },
}


# scenario files


def _parse_config(value, where: str) -> Configuration:
    if isinstance(value, str):
        return Configuration(value)
    if isinstance(value, Mapping):
        extra = set(value) - {"os", "software"}
        if extra or "os" not in value:
            raise ValidationError(f"{where}: configuration must be {{'os': ..., 'software': [...]}}")
        return Configuration(value["os"], frozenset(value.get("software", ())))
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return Configuration(value[0], frozenset(value[1]))
    raise ValidationError(f"{where}: cannot read a configuration from {value!r}")


def dependency_from_dict(doc: Mapping) -> DependencyModel:
    """``{"chain_order": [...], "conditional": [{"software", "os", "given", "p"}, ...]}``."""
    cond = {}
    for entry in doc.get("conditional", []):
        cond[entry["software"], (entry["os"], frozenset(entry.get("given", ())))] = float(entry["p"])
    return DependencyModel(tuple(doc["chain_order"]), cond)


def prior_from_dict(space: ConfigurationSpace, doc: Mapping | None, where: str = "prior") -> Belief:
    """Priors are ``{"kind": "uniform"}``, ``{"kind": "chain", "os": {...},
    "dependency": {...}}`` or ``{"kind": "mass", "mass": [[os, [sw...], p], ...]}``."""
    if doc is None:
        return uniform_belief(space)
    kind = doc.get("kind", "uniform")
    if kind == "uniform":
        return uniform_belief(space)
    if kind == "chain":
        dep = dependency_from_dict(doc["dependency"]) if doc.get("dependency") else None
        return chain_rule_prior(space, doc.get("os"), dep)
    if kind == "mass":
        mass = {}
        for os, sw, p in doc["mass"]:
            mass[Configuration(os, frozenset(sw))] = float(p)
        return Belief.from_mapping(space, mass)
    raise ValidationError(f"{where}: unknown prior kind {kind!r}")


@dataclass
class Scenario:
    kb: KnowledgeBase
    space: ConfigurationSpace
    streams: dict[NodeIdentity, list[Observation]]
    priors: dict[NodeIdentity, Belief]
    truth: GroundTruth
    threshold: float = DEFAULT_THRESHOLD
    deception: DeceptionRewrite | None = None
    parse_report: ParseReport = field(default_factory=ParseReport)

    def run(self) -> ScenarioReport:
        streams = self.streams
        if self.deception is not None:
            streams = apply_deception(streams, self.deception, self.kb.schema)
        return run_scenario(self.kb, streams, self.priors, self.truth, self.threshold)


SCENARIO_KEYS = ["kb", "space", "observations", "ground_truth"]
SCENARIO_OPTIONAL = ["ingest", "priors", "threshold", "deception"]


def load_scenario(path: str | Path, seed: int | None = None) -> Scenario:
    """Load a scenario definition; relative paths resolve against its directory.

    ``seed`` overrides the deception seed stored in the file.
    """
    path = Path(path)
    doc = _documents.check_document(_documents.read_json(path, "scenario"), "scenario", SCENARIO_KEYS, SCENARIO_OPTIONAL)
    base = path.parent

    def ref(key: str) -> Path:
        # a dangling reference is a defect of the scenario, not an I/O failure
        p = base / doc[key]
        if not p.is_file():
            raise DocumentError(f"scenario {key!r} points to missing file {p}")
        return p

    kb = KnowledgeBase.from_dict(_documents.read_json(ref("kb"), "knowledge base"))
    space = ConfigurationSpace.from_dict(_documents.read_json(ref("space"), "configuration space"))
    ingest = IngestConfig()
    if doc.get("ingest"):
        ingest = IngestConfig.from_dict(_documents.read_json(ref("ingest"), "ingest config"))
    parsed = parse_stream(ref("observations"), ingest, kb.schema)

    truth = {}
    for addr, value in doc["ground_truth"].items():
        node = NodeIdentity.of(addr)
        try:
            truth[node] = space.validate(_parse_config(value, f"ground truth {addr}"))
        except ValidationError as exc:
            raise type(exc)(f"node {addr}: {exc}") from None

    prior_docs = doc.get("priors") or {}
    default_prior = prior_from_dict(space, prior_docs.get("default"), "default prior")
    priors = {}
    for node in list(parsed.streams) + [n for n in truth if n not in parsed.streams]:
        spec = prior_docs.get(node.primary)
        priors[node] = default_prior if spec is None else prior_from_dict(space, spec, f"prior {node}")
    unknown = set(prior_docs) - {"default"} - {n.primary for n in priors}
    if unknown:
        raise UnknownNode(f"priors given for nodes without observations or ground truth: {sorted(unknown)}")
    missing = [n for n in parsed.streams if n not in truth]
    if missing:
        raise UnknownNode(f"node {missing[0]}: observed but has no ground truth")

    deception = None
    if doc.get("deception"):
        deception = DeceptionRewrite.from_dict(doc["deception"], seed)
        deception.validate(kb.schema)

    threshold = float(doc.get("threshold", DEFAULT_THRESHOLD))
    if not 0 < threshold <= 1:
        raise ValidationError("threshold must lie in (0, 1]")
    return Scenario(kb, space, parsed.streams, priors, GroundTruth(truth), threshold, deception, parsed.report)
