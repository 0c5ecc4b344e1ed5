"""Nodes, configuration spaces and belief distributions over them.

A node's configuration is an OS plus a set of installed software. The space
of candidate configurations is the product of the OS universe with the power
set of the software universe, optionally restricted to an explicit list of
admissible configurations.
"""
from __future__ import annotations

import ipaddress
import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from . import _documents
from .errors import (
    InadmissibleConfiguration,
    InvalidAddress,
    SpaceTooLarge,
    UnknownNode,
    ValidationError,
)

DEFAULT_MAX_SIZE = 100_000
NORMALIZATION_TOL = 1e-9

_MAC_RE = re.compile(r"^[0-9A-Fa-f]{2}(:[0-9A-Fa-f]{2}){5}$")


def validate_address(address: str) -> str:
    """Return ``address`` unchanged if it is a dotted-quad IPv4 or a colon MAC."""
    if not isinstance(address, str):
        raise InvalidAddress(f"address must be a string, got {type(address).__name__}")
    if _MAC_RE.match(address):
        return address
    try:
        ipaddress.IPv4Address(address)
    except ValueError:
        raise InvalidAddress(f"not an IPv4 or MAC address: {address!r}") from None
    return address


@dataclass(frozen=True)
class NodeIdentity:
    """The set of addresses a node answers to. Addresses never enter likelihoods."""

    addresses: tuple[str, ...]

    def __post_init__(self):
        addresses = tuple(self.addresses)
        if not addresses:
            raise InvalidAddress("a node needs at least one address")
        for a in addresses:
            validate_address(a)
        if len(set(addresses)) != len(addresses):
            raise InvalidAddress(f"duplicate addresses in {addresses}")
        object.__setattr__(self, "addresses", addresses)

    @classmethod
    def of(cls, *addresses: str) -> "NodeIdentity":
        return cls(tuple(addresses))

    @property
    def primary(self) -> str:
        return self.addresses[0]

    def __str__(self) -> str:
        return self.primary


@dataclass(frozen=True)
class Configuration:
    os: str
    software: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if isinstance(self.software, str):
            raise ValidationError("software must be a collection of labels, not a string")
        object.__setattr__(self, "software", frozenset(self.software))

    @property
    def label(self) -> str:
        """Readable label, e.g. ``ubuntu`` or ``ubuntu+apache+ssh``."""
        if not self.software:
            return self.os
        return "+".join([self.os, *sorted(self.software)])

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class ConfigurationSpace:
    """Candidate configurations for a node.

    Without ``admissible`` the space is the full product ``O x P(S)`` of
    size ``|O| * 2**|S|``.
    """

    os_universe: tuple[str, ...]
    software_universe: tuple[str, ...] = ()
    admissible: tuple[Configuration, ...] | None = None

    def __post_init__(self):
        os_u = tuple(self.os_universe)
        sw_u = tuple(self.software_universe)
        if not os_u:
            raise ValidationError("os_universe must be non-empty")
        if len(set(os_u)) != len(os_u):
            raise ValidationError("os_universe has duplicates")
        if len(set(sw_u)) != len(sw_u):
            raise ValidationError("software_universe has duplicates")
        object.__setattr__(self, "os_universe", os_u)
        object.__setattr__(self, "software_universe", sw_u)
        object.__setattr__(self, "_os_index", {o: i for i, o in enumerate(os_u)})
        object.__setattr__(self, "_sw_bit", {s: 1 << i for i, s in enumerate(sw_u)})
        if self.admissible is not None:
            adm = tuple(self.admissible)
            for c in adm:
                self._check_universes(c)
            if len(set(adm)) != len(adm):
                raise ValidationError("admissible list has duplicates")
            object.__setattr__(self, "admissible", adm)
            object.__setattr__(self, "_admissible_set", frozenset(adm))

    def _check_universes(self, config: Configuration) -> None:
        if config.os not in self._os_index:
            raise InadmissibleConfiguration(f"OS {config.os!r} is not in the OS universe")
        unknown = sorted(s for s in config.software if s not in self._sw_bit)
        if unknown:
            raise InadmissibleConfiguration(f"software {unknown} not in the software universe")

    def sort_key(self, config: Configuration) -> tuple[int, int]:
        """Enumeration key: OS index, then software subset as an ascending bitmask."""
        return self._os_index[config.os], sum(self._sw_bit[s] for s in config.software)

    def validate(self, config: Configuration) -> Configuration:
        self._check_universes(config)
        if self.admissible is not None and config not in self._admissible_set:
            raise InadmissibleConfiguration(f"{config.label} is not in the admissible list")
        return config

    def __contains__(self, config: object) -> bool:
        if not isinstance(config, Configuration):
            return False
        try:
            self.validate(config)
        except InadmissibleConfiguration:
            return False
        return True

    @property
    def size(self) -> int:
        if self.admissible is not None:
            return len(self.admissible)
        return len(self.os_universe) * 2 ** len(self.software_universe)

    def enumerate(self, max_size: int = DEFAULT_MAX_SIZE) -> list[Configuration]:
        return enumerate_space(self, max_size)

    # serialization

    def to_dict(self) -> dict:
        doc = {
            "version": _documents.VERSION,
            "os": list(self.os_universe),
            "software": list(self.software_universe),
        }
        if self.admissible is not None:
            doc["admissible"] = [
                [c.os, sorted(c.software, key=self._sw_bit.__getitem__)] for c in self.admissible
            ]
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ConfigurationSpace":
        _documents.check_document(doc, "configuration space", ["os", "software"], ["admissible"])
        admissible = None
        if doc.get("admissible") is not None:
            try:
                admissible = tuple(Configuration(os, frozenset(sw)) for os, sw in doc["admissible"])
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"admissible entries must be [os, [software...]]: {exc}") from None
        return cls(tuple(doc["os"]), tuple(doc["software"]), admissible)

    def dumps(self) -> str:
        return _documents.dump_json(self.to_dict())

    @classmethod
    def loads(cls, text: str | bytes) -> "ConfigurationSpace":
        return cls.from_dict(_documents.parse_json(text, "configuration space"))


def enumerate_space(space: ConfigurationSpace, max_size: int = DEFAULT_MAX_SIZE) -> list[Configuration]:
    """List every admissible configuration in canonical order.

    Raises:
        SpaceTooLarge: the implied full product has more than ``max_size``
            members and no admissible list was given.
    """
    if max_size < 1:
        raise ValueError("max_size must be positive")
    if space.admissible is not None:
        return sorted(space.admissible, key=space.sort_key)
    if space.size > max_size:
        raise SpaceTooLarge(
            f"|O|*2^|S| = {space.size} exceeds max_size={max_size}; supply an admissible list"
        )
    sw = space.software_universe
    out = []
    for os in space.os_universe:
        for mask in range(2 ** len(sw)):
            out.append(Configuration(os, frozenset(s for i, s in enumerate(sw) if mask >> i & 1)))
    return out


class Belief:
    """A normalized distribution over the configurations of one space.

    Stored as a probability vector aligned with the space's enumeration
    order. Instances are treated as immutable.
    """

    __slots__ = ("space", "configurations", "_p", "_index")

    def __init__(self, space: ConfigurationSpace, configurations: Sequence[Configuration],
                 probabilities: Iterable[float], *, _trusted: bool = False):
        p = np.array(probabilities, dtype=float)
        configurations = tuple(configurations)
        if not _trusted:
            if p.shape != (len(configurations),):
                raise ValidationError("one probability per configuration is required")
            for c in configurations:
                space.validate(c)
            if len(set(configurations)) != len(configurations):
                raise ValidationError("duplicate configurations in belief")
            if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
                raise ValidationError("probabilities must lie in [0, 1]")
            total = float(p.sum())
            if abs(total - 1.0) > NORMALIZATION_TOL:
                raise ValidationError(f"belief sums to {total!r}, not 1")
        p.setflags(write=False)
        self.space = space
        self.configurations = configurations
        self._p = p
        self._index = {c: i for i, c in enumerate(configurations)}

    @classmethod
    def from_mapping(cls, space: ConfigurationSpace, mass: Mapping[Configuration, float],
                     max_size: int = DEFAULT_MAX_SIZE) -> "Belief":
        """Build a belief from a sparse mapping; unlisted configurations get 0."""
        for c in mass:
            space.validate(c)
        configs = enumerate_space(space, max_size)
        return cls(space, configs, [float(mass.get(c, 0.0)) for c in configs])

    @property
    def probabilities(self) -> np.ndarray:
        return self._p

    def mass(self, config: Configuration) -> float:
        i = self._index.get(config)
        if i is None:
            self.space.validate(config)
            return 0.0
        return float(self._p[i])

    __getitem__ = mass

    def __len__(self) -> int:
        return len(self.configurations)

    def __iter__(self) -> Iterator[Configuration]:
        return iter(self.configurations)

    def items(self) -> Iterator[tuple[Configuration, float]]:
        return zip(self.configurations, map(float, self._p))

    def as_dict(self) -> dict[Configuration, float]:
        return dict(self.items())

    def allclose(self, other: "Belief", atol: float = 1e-9) -> bool:
        if set(self.configurations) != set(other.configurations):
            return False
        return all(abs(p - other.mass(c)) <= atol for c, p in self.items())

    def __repr__(self) -> str:
        body = ", ".join(f"{c.label}: {p:.4g}" for c, p in self.items())
        return f"Belief({{{body}}})"


def uniform_belief(space: ConfigurationSpace, max_size: int = DEFAULT_MAX_SIZE) -> Belief:
    configs = enumerate_space(space, max_size)
    n = len(configs)
    return Belief(space, configs, np.full(n, 1.0 / n))


@dataclass(frozen=True)
class NetworkBelief:
    """Factorized belief over a whole network: one marginal per node.

    The joint over the product of node spaces is the product of marginals,
    which is exact when the per-node streams are updated independently.
    """

    per_node: Mapping[NodeIdentity, Belief]

    def __post_init__(self):
        object.__setattr__(self, "per_node", dict(self.per_node))

    @property
    def nodes(self) -> tuple[NodeIdentity, ...]:
        return tuple(self.per_node)

    def joint_size(self) -> int:
        return math.prod(len(b) for b in self.per_node.values())

    def iter_joint(self, max_size: int = 10**6) -> Iterator[tuple[dict[NodeIdentity, Configuration], float]]:
        """Yield every full assignment with its joint mass (bounded enumeration)."""
        if self.joint_size() > max_size:
            raise SpaceTooLarge(f"joint space has {self.joint_size()} members > {max_size}")
        nodes = self.nodes
        for combo in itertools.product(*(self.per_node[n].configurations for n in nodes)):
            assignment = dict(zip(nodes, combo))
            yield assignment, joint_mass(self, assignment)


def joint_mass(network: NetworkBelief, assignment: Mapping[NodeIdentity, Configuration]) -> float:
    """Product over nodes of the mass each node's belief gives its assigned configuration."""
    extra = [n for n in assignment if n not in network.per_node]
    if extra:
        raise UnknownNode(f"unknown node(s): {', '.join(map(str, extra))}")
    missing = [n for n in network.per_node if n not in assignment]
    if missing:
        raise UnknownNode(f"assignment does not cover node(s): {', '.join(map(str, missing))}")
    result = 1.0
    for node, belief in network.per_node.items():
        result *= belief.mass(assignment[node])
    return result
