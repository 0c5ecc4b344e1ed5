"""Sequential Bayesian belief updates for one node, and a joint oracle.

The per-node update multiplies the current belief by the observation
likelihood of every configuration and renormalizes. It runs in log space
with max subtraction so that long streams of small likelihoods do not
underflow.
"""
from __future__ import annotations

import csv
import io
import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import (
    DegeneratePrior,
    IncompleteDependencyModel,
    SpaceTooLarge,
    TotalEvidenceZero,
    TotalEvidenceZeroWarning,
    UnknownNode,
    ValidationError,
)
from .kb import KnowledgeBase, Observation, log_likelihood, observation_likelihood
from .spaces import (
    DEFAULT_MAX_SIZE,
    NORMALIZATION_TOL,
    Belief,
    Configuration,
    ConfigurationSpace,
    NetworkBelief,
    NodeIdentity,
    enumerate_space,
)

logger = logging.getLogger(__name__)

Context = tuple[str, frozenset]


@dataclass(frozen=True)
class DependencyModel:
    """Software presence probabilities conditioned on the OS and earlier software.

    ``conditional[(s, (os, present))]`` is ``Pr(s installed | os, present)``
    where ``present`` is the set of software that precedes ``s`` in
    ``chain_order`` and is installed.
    """

    chain_order: tuple[str, ...]
    conditional: Mapping[tuple[str, Context], float]

    def __post_init__(self):
        object.__setattr__(self, "chain_order", tuple(self.chain_order))
        cond = {}
        for (s, (os, present)), p in self.conditional.items():
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"Pr({s} | {os}, {sorted(present)}) = {p!r} is not a probability")
            cond[s, (os, frozenset(present))] = float(p)
        object.__setattr__(self, "conditional", cond)

    @classmethod
    def independent(cls, chain_order: Sequence[str], marginals: Mapping[tuple[str, str], float]) -> "DependencyModel":
        """Model where each software depends only on the OS: ``marginals[(s, os)]``."""
        chain_order = tuple(chain_order)
        oses = {os for _, os in marginals}
        cond = {}
        for i, s in enumerate(chain_order):
            earlier = chain_order[:i]
            for os in oses:
                if (s, os) not in marginals:
                    continue
                for r in range(len(earlier) + 1):
                    for present in itertools.combinations(earlier, r):
                        cond[s, (os, frozenset(present))] = marginals[s, os]
        return cls(chain_order, cond)

    def probability(self, software: str, os: str, present: frozenset) -> float:
        try:
            return self.conditional[software, (os, frozenset(present))]
        except KeyError:
            raise IncompleteDependencyModel(
                f"no Pr({software} | os={os}, present={sorted(present)})"
            ) from None


def chain_rule_prior(
    space: ConfigurationSpace,
    os_prior: Mapping[str, float] | None = None,
    dep: DependencyModel | None = None,
    max_size: int = DEFAULT_MAX_SIZE,
) -> Belief:
    """Prior built from OS probabilities and the chain rule over software.

    ``mass(<o, S>) = os_prior(o) * prod_s [p_s if s in S else 1 - p_s]`` with
    ``p_s`` conditioned on the OS and the already-chained software present.
    Renormalized over the admissible set when that is a strict subset of the
    full product. ``os_prior`` defaults to uniform over the OS universe.
    """
    if os_prior is None:
        os_prior = dict.fromkeys(space.os_universe, 1.0 / len(space.os_universe))
    unknown = set(os_prior) - set(space.os_universe)
    if unknown:
        raise ValidationError(f"os_prior names OSes outside the universe: {sorted(unknown)}")
    if abs(math.fsum(os_prior.values()) - 1.0) > NORMALIZATION_TOL:
        raise ValidationError("os_prior must sum to 1")
    if space.software_universe:
        if dep is None:
            raise IncompleteDependencyModel("a dependency model is required when the software universe is non-empty")
        if sorted(dep.chain_order) != sorted(space.software_universe) or len(set(dep.chain_order)) != len(dep.chain_order):
            raise IncompleteDependencyModel("chain_order must be a permutation of the software universe")
    chain = dep.chain_order if dep is not None else ()

    configs = enumerate_space(space, max_size)
    masses = []
    for c in configs:
        m = float(os_prior.get(c.os, 0.0))
        present: frozenset = frozenset()
        for s in chain:
            if m == 0.0:
                break
            p = dep.probability(s, c.os, present)
            if s in c.software:
                m *= p
                present = present | {s}
            else:
                m *= 1.0 - p
        masses.append(m)
    total = math.fsum(masses)
    if total <= 0.0:
        raise DegeneratePrior("prior assigns zero mass to every admissible configuration")
    return Belief(space, configs, np.array(masses) / total)


def _log_likelihoods(belief: Belief, observation: Observation, kb: KnowledgeBase) -> np.ndarray:
    return np.array([log_likelihood(kb, observation, c) for c in belief.configurations])


def _posterior(belief: Belief, observation: Observation, kb: KnowledgeBase) -> Belief:
    p = belief.probabilities
    with np.errstate(divide="ignore"):
        log_prior = np.log(p)
    loglik = _log_likelihoods(belief, observation, kb)
    if np.isfinite(loglik[0]) and np.all(loglik == loglik[0]):
        # constant likelihood (e.g. no features observed): posterior is the prior exactly
        return belief
    log_post = log_prior + loglik
    top = log_post.max()
    if not np.isfinite(top):
        raise TotalEvidenceZero("every configuration with prior mass has zero likelihood")
    w = np.exp(log_post - top)
    w /= w.sum()
    return Belief(belief.space, belief.configurations, w, _trusted=True)


def bayes_update(belief: Belief, observation: Observation, kb: KnowledgeBase) -> Belief:
    """Posterior belief after one observation.

    If the total evidence is zero the update is refused: a
    :class:`TotalEvidenceZeroWarning` is issued and ``belief`` is returned
    unchanged.
    """
    try:
        return _posterior(belief, observation, kb)
    except TotalEvidenceZero as exc:
        warnings.warn(f"update refused: {exc}", TotalEvidenceZeroWarning, stacklevel=2)
        return belief


class MapEstimate(NamedTuple):
    configuration: Configuration
    probability: float
    tie: bool


def map_estimate(belief: Belief, tie_tol: float = 1e-12) -> MapEstimate:
    """Most probable configuration; ties go to the earliest in enumeration order."""
    p = belief.probabilities
    order = sorted(range(len(p)), key=lambda i: belief.space.sort_key(belief.configurations[i]))
    # max() keeps the first maximum it meets, i.e. the earliest in order
    best = max(order, key=lambda i: p[i])
    tie = sum(1 for i in order if abs(p[i] - p[best]) <= tie_tol) > 1
    return MapEstimate(belief.configurations[best], float(p[best]), tie)


@dataclass(frozen=True)
class BeliefTrajectory:
    """Belief snapshots over a stream; ``steps[0]`` is the prior at index 0.

    ``rejected`` lists the observation indices whose update was refused
    because the total evidence was zero.
    """

    steps: tuple[tuple[int, Belief], ...]
    map_sequence: tuple[Configuration, ...]
    rejected: tuple[int, ...] = ()

    def __post_init__(self):
        idx = [i for i, _ in self.steps]
        if not idx or idx[0] != 0 or any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValidationError("trajectory indices must start at 0 and increase strictly")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def prior(self) -> Belief:
        return self.steps[0][1]

    @property
    def final(self) -> Belief:
        return self.steps[-1][1]

    @property
    def beliefs(self) -> list[Belief]:
        return [b for _, b in self.steps]

    def to_csv(self, wide: bool = False, fmt=repr) -> str:
        """CSV export.

        Long form has columns ``obs_index,configuration_label,probability``.
        Wide form has a ``step`` column (``init. belief``, ``obs. 1``, ...)
        and one column per configuration label.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        configs = self.prior.configurations
        if wide:
            w.writerow(["step", *(c.label for c in configs)])
            for i, b in self.steps:
                w.writerow([step_label(i), *(fmt(b.mass(c)) for c in configs)])
        else:
            w.writerow(["obs_index", "configuration_label", "probability"])
            for i, b in self.steps:
                for c in configs:
                    w.writerow([i, c.label, fmt(b.mass(c))])
        return buf.getvalue()


def step_label(index: int) -> str:
    return "init. belief" if index == 0 else f"obs. {index}"


def update_stream(prior: Belief, stream: Iterable[Observation], kb: KnowledgeBase) -> BeliefTrajectory:
    """Fold :func:`bayes_update` over ``stream``, keeping every intermediate belief."""
    steps = [(0, prior)]
    maps = [map_estimate(prior).configuration]
    rejected = []
    belief = prior
    for i, obs in enumerate(stream, start=1):
        try:
            belief = _posterior(belief, obs, kb)
        except TotalEvidenceZero as exc:
            warnings.warn(f"observation {i}: update refused: {exc}", TotalEvidenceZeroWarning, stacklevel=2)
            rejected.append(i)
        except ValidationError as exc:
            raise type(exc)(f"observation {i}: {exc}") from exc
        steps.append((i, belief))
        maps.append(map_estimate(belief).configuration)
    return BeliefTrajectory(tuple(steps), tuple(maps), tuple(rejected))


def update_network(network: NetworkBelief, streams: Mapping[NodeIdentity, Sequence[Observation]],
                   kb: KnowledgeBase) -> NetworkBelief:
    """Update every node's marginal independently on its own stream."""
    unknown = [n for n in streams if n not in network.per_node]
    if unknown:
        raise UnknownNode(f"streams for unknown node(s): {', '.join(map(str, unknown))}")
    return NetworkBelief({
        node: update_stream(b, streams.get(node, ()), kb).final for node, b in network.per_node.items()
    })


@dataclass(frozen=True)
class JointBelief:
    """Explicit distribution over the product of node configuration spaces.

    ``probabilities`` has one axis per node, indexed like that node's
    ``configurations`` tuple.
    """

    nodes: tuple[NodeIdentity, ...]
    configurations: tuple[tuple[Configuration, ...], ...]
    probabilities: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != tuple(len(c) for c in self.configurations):
            raise ValidationError("joint probability array shape does not match node spaces")
        if abs(p.sum() - 1.0) > NORMALIZATION_TOL or np.any(p < 0):
            raise ValidationError("joint belief must be a normalized distribution")
        object.__setattr__(self, "probabilities", p)

    @classmethod
    def from_network(cls, network: NetworkBelief) -> "JointBelief":
        nodes = network.nodes
        p = np.ones(())
        for n in nodes:
            p = np.multiply.outer(p, network.per_node[n].probabilities)
        return cls(nodes, tuple(network.per_node[n].configurations for n in nodes), p)

    def marginal(self, node: NodeIdentity) -> dict[Configuration, float]:
        try:
            axis = self.nodes.index(node)
        except ValueError:
            raise UnknownNode(f"unknown node {node}") from None
        others = tuple(i for i in range(len(self.nodes)) if i != axis)
        m = self.probabilities.sum(axis=others)
        return dict(zip(self.configurations[axis], map(float, m)))


def joint_update_oracle(network_prior: JointBelief, streams: Mapping[NodeIdentity, Sequence[Observation]],
                        kb: KnowledgeBase, max_size: int = 10**5) -> JointBelief:
    """Brute-force posterior over every network configuration.

    Each joint assignment is weighted by its prior times the direct product of
    every node's observation likelihoods, then the whole table is
    renormalized. No log space and no factorization: this is the reference
    the per-node engine is checked against.
    """
    size = math.prod(len(c) for c in network_prior.configurations)
    if size > max_size:
        raise SpaceTooLarge(f"joint space has {size} members > {max_size}")
    unknown = [n for n in streams if n not in network_prior.nodes]
    if unknown:
        raise UnknownNode(f"streams for unknown node(s): {', '.join(map(str, unknown))}")
    post = np.zeros_like(network_prior.probabilities)
    axes = [range(len(c)) for c in network_prior.configurations]
    for idx in itertools.product(*axes):
        weight = network_prior.probabilities[idx]
        for k, node in enumerate(network_prior.nodes):
            config = network_prior.configurations[k][idx[k]]
            for obs in streams.get(node, ()):
                weight *= observation_likelihood(kb, obs, config)
        post[idx] = weight
    total = post.sum()
    if total <= 0:
        raise TotalEvidenceZero("joint evidence is zero")
    return JointBelief(network_prior.nodes, network_prior.configurations, post / total)
