"""Synthetic three-OS case study: five hosts, passive TTL / window observations.

Two Ubuntu hosts (192.168.10.19 and .12) send fifteen near-ambiguous samples
each: Ubuntu and macOS share TTL 64, and the window bin only slightly favours
Ubuntu. Three Windows hosts (.14, .15, .8) send distinctive TTL-128 samples.

The knowledge base is not estimated from data. Its entries are chosen so
that one Ubuntu-host observation under a uniform prior yields the posterior
``(win, ubuntu, mac) = (0.0055, 0.5359, 0.4586)``::

    L(win) : L(ubuntu) : L(mac) = 0.0055/0.4586 : 0.5359/0.4586 : 1
"""
from __future__ import annotations

from pathlib import Path

from . import _documents
from .ingest import IngestConfig
from .kb import FeatureSchema, KnowledgeBase
from .spaces import Configuration, ConfigurationSpace, NodeIdentity

OS_LABELS = ("win", "ubuntu", "mac")

# single-step posterior from a uniform prior, ordered as OS_LABELS
FIRST_POSTERIOR = (0.0055, 0.5359, 0.4586)

UBUNTU_TO_MAC = FIRST_POSTERIOR[1] / FIRST_POSTERIOR[2]
WIN_TO_MAC = FIRST_POSTERIOR[0] / FIRST_POSTERIOR[2]

AMBIGUOUS_NODES = ("192.168.10.19", "192.168.10.12")
DISTINCT_NODES = ("192.168.10.14", "192.168.10.15", "192.168.10.8")
# report row order
NODE_ORDER = ("192.168.10.14", "192.168.10.19", "192.168.10.12", "192.168.10.15", "192.168.10.8")
AMBIGUOUS_STREAM_LENGTH = 15
DISTINCT_STREAM_LENGTH = 4

INGEST = IngestConfig()
TTL_DOMAIN = tuple(str(t) for t in INGEST.ttl_classes)
WINDOW_DOMAIN = tuple(INGEST.window_labels)

_P_TTL_MATCH = 0.96
_P_TTL_OTHER = 0.02
_P_WIN_LOW = 0.1
_P_MID_MAC = 0.4


def schema() -> FeatureSchema:
    return FeatureSchema(("ttl_class", "window_bin"), (), {"ttl_class": TTL_DOMAIN, "window_bin": WINDOW_DOMAIN})


def space() -> ConfigurationSpace:
    return ConfigurationSpace(OS_LABELS, ())


def knowledge_base() -> KnowledgeBase:
    low, mid, high = WINDOW_DOMAIN
    unix_ttl = {"64": _P_TTL_MATCH, "128": _P_TTL_OTHER, "255": _P_TTL_OTHER}
    win_ttl = {"64": _P_TTL_OTHER, "128": _P_TTL_MATCH, "255": _P_TTL_OTHER}
    # an Ubuntu-host sample is (ttl 64, mid window); divide out each OS's TTL factor
    mid_mac = _P_MID_MAC
    mid_ubuntu = _P_MID_MAC * UBUNTU_TO_MAC
    mid_win = WIN_TO_MAC * _P_TTL_MATCH * _P_MID_MAC / _P_TTL_OTHER

    def window(p_mid):
        return {low: _P_WIN_LOW, mid: p_mid, high: 1.0 - _P_WIN_LOW - p_mid}

    tables = {
        "win": {"ttl_class": win_ttl, "window_bin": window(mid_win)},
        "ubuntu": {"ttl_class": dict(unix_ttl), "window_bin": window(mid_ubuntu)},
        "mac": {"ttl_class": dict(unix_ttl), "window_bin": window(mid_mac)},
    }
    return KnowledgeBase(schema(), tables, {}, alpha=1.0)


def ground_truth() -> dict[NodeIdentity, Configuration]:
    truth = {NodeIdentity.of(a): Configuration("ubuntu") for a in AMBIGUOUS_NODES}
    truth.update({NodeIdentity.of(a): Configuration("win") for a in DISTINCT_NODES})
    return {NodeIdentity.of(a): truth[NodeIdentity.of(a)] for a in NODE_ORDER}


def observations_csv() -> str:
    """Raw ``src_addr,ttl,window`` rows, hop-decayed TTLs included."""
    lines = ["src_addr,ttl,window"]
    for addr in NODE_ORDER:
        if addr in AMBIGUOUS_NODES:
            for k in range(AMBIGUOUS_STREAM_LENGTH):
                lines.append(f"{addr},{64 - k % 3},29200")
        else:
            for k in range(DISTINCT_STREAM_LENGTH):
                lines.append(f"{addr},{128 - k % 2},65535")
    return "\n".join(lines) + "\n"


def training_records_csv() -> str:
    """Small labelled corpus (``kind,label,ttl,window``) for building a KB from data."""
    rows = ["kind,label,ttl,window"]
    corpus = {
        "win": [(128, 65535)] * 6 + [(127, 8192)] * 3 + [(64, 65535)],
        "ubuntu": [(64, 29200)] * 5 + [(63, 65535)] * 4 + [(64, 5840)],
        "mac": [(64, 65535)] * 5 + [(64, 29200)] * 4 + [(255, 4096)],
    }
    for label, samples in corpus.items():
        rows.extend(f"os,{label},{ttl},{win}" for ttl, win in samples)
    return "\n".join(rows) + "\n"


def scenario_document(threshold: float = 0.9) -> dict:
    return {
        "version": _documents.VERSION,
        "kb": "kb.json",
        "space": "space.json",
        "ingest": "ingest.json",
        "observations": "observations.csv",
        "ground_truth": {n.primary: {"os": c.os, "software": sorted(c.software)} for n, c in ground_truth().items()},
        "threshold": threshold,
    }


def write_case_study(directory: str | Path) -> Path:
    """Write every case-study input file into ``directory``; return the scenario path."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "kb.json").write_text(knowledge_base().dumps(), encoding="utf-8")
    (d / "space.json").write_text(space().dumps(), encoding="utf-8")
    (d / "ingest.json").write_text(INGEST.dumps(), encoding="utf-8")
    (d / "schema.json").write_text(schema().dumps(), encoding="utf-8")
    (d / "observations.csv").write_text(observations_csv(), encoding="utf-8")
    (d / "records.csv").write_text(training_records_csv(), encoding="utf-8")
    path = d / "scenario.json"
    path.write_text(_documents.dump_json(scenario_document()), encoding="utf-8")
    return path
