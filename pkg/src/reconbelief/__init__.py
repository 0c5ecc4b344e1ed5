"""Attacker belief formation from passive fingerprinting observations."""
from .engine import (
    BeliefTrajectory,
    DependencyModel,
    JointBelief,
    MapEstimate,
    bayes_update,
    chain_rule_prior,
    joint_update_oracle,
    map_estimate,
    update_network,
    update_stream,
)
from . import casestudy, errors
from .errors import ReconBeliefError, ValidationError
from .ingest import IngestConfig, ParseReport, ParseResult, RawRecord, WindowBin, discretize_window, normalize_ttl, parse_records, parse_stream, write_stream
from .kb import FeatureSchema, KnowledgeBase, LabelKind, Observation, estimate_kb, log_likelihood, observation_likelihood
from .scenario import (
    DeceptionRewrite,
    DeceptionRule,
    GroundTruth,
    NodeResult,
    Scenario,
    ScenarioReport,
    apply_deception,
    emit_report,
    load_scenario,
    run_scenario,
)
from .spaces import (
    Belief,
    Configuration,
    ConfigurationSpace,
    NetworkBelief,
    NodeIdentity,
    enumerate_space,
    joint_mass,
    uniform_belief,
)

__version__ = "0.1.0"
