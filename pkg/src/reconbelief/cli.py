"""Command-line front end.

Exit codes: 0 success, 1 environment / I/O failure, 2 validation failure.
All outputs are rendered in memory first and then written via temp file +
rename, so a failing run never leaves a half-written file behind.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from collections import Counter
from pathlib import Path
from typing import Mapping, Sequence

from . import _documents
from .engine import map_estimate, update_stream
from .errors import ReconBeliefError, ValidationError
from .ingest import IngestConfig, parse_records, parse_stream
from .kb import FeatureSchema, KnowledgeBase, estimate_kb
from .scenario import emit_report, load_scenario, prior_from_dict, trajectory_artifact_name
from .spaces import ConfigurationSpace

EXIT_OK, EXIT_IO, EXIT_INVALID = 0, 1, 2

log = logging.getLogger("reconbelief")


def write_atomic(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_artifacts(out_dir: Path, artifacts: Mapping[str, bytes]) -> list[Path]:
    paths = []
    for name, data in artifacts.items():
        path = out_dir / name
        write_atomic(path, data)
        paths.append(path)
    return paths


def _load(cls, path: str, kind: str):
    return cls.from_dict(_documents.read_json(path, kind))


def cmd_build_kb(args) -> int:
    schema = _load(FeatureSchema, args.schema, "feature schema")
    ingest = _load(IngestConfig, args.ingest, "ingest config") if args.ingest else None
    records, _ = parse_records(args.records, schema, ingest)
    kb = estimate_kb(records, schema, args.alpha, os_labels=args.os_label, software_labels=args.software_label)
    data = kb.dumps().encode("utf-8")
    if kb.has_exact_zeros():
        print(f"warning: alpha={args.alpha:g} left exact zero probabilities in the knowledge base", file=sys.stderr)
    write_atomic(Path(args.out), data)
    counts = Counter((kind.value, label) for kind, label, _ in records)
    for (kind, label), n in sorted(counts.items()):
        print(f"{kind} {label} {n}")
    print(f"wrote {args.out}: {len(kb.os_tables)} OS tables, {len(kb.software_tables)} software tables, "
          f"{len(records)} records, alpha={args.alpha:g}")
    return EXIT_OK


def cmd_update(args) -> int:
    kb = _load(KnowledgeBase, args.kb, "knowledge base")
    space = _load(ConfigurationSpace, args.space, "configuration space")
    ingest = _load(IngestConfig, args.ingest, "ingest config") if args.ingest else IngestConfig()
    prior = prior_from_dict(space, _documents.read_json(args.prior, "prior") if args.prior else None)
    parsed = parse_stream(args.observations, ingest, kb.schema)
    streams = parsed.streams
    if args.node:
        streams = {n: s for n, s in streams.items() if args.node in n.addresses}
        if not streams:
            raise ValidationError(f"no observations for node {args.node}")
    lines, artifacts = [], {}
    for node, stream in streams.items():
        traj = update_stream(prior, stream, kb)
        m = map_estimate(traj.final)
        tie = " tie" if m.tie else ""
        lines.append(f"{node} {m.configuration.label} {m.probability:.4f} {len(stream)}{tie}")
        artifacts[trajectory_artifact_name(node)] = traj.to_csv(wide=args.wide).encode("utf-8")
    if args.out_dir:
        write_artifacts(Path(args.out_dir), artifacts)
    for line in lines:
        print(line)
    if parsed.report.n_dropped:
        print(f"dropped {parsed.report.n_dropped} of {parsed.report.rows_read} rows", file=sys.stderr)
        for line, reason in parsed.report.dropped:
            print(f"  line {line}: {reason}", file=sys.stderr)
    return EXIT_OK


def cmd_run_scenario(args) -> int:
    scenario = load_scenario(args.scenario, seed=args.seed)
    report = scenario.run()
    artifacts = emit_report(report, args.format, args.wide)
    write_artifacts(Path(args.out_dir), artifacts)
    for line in report.summary_lines():
        print(line)
    if scenario.parse_report.n_dropped:
        print(f"dropped {scenario.parse_report.n_dropped} observation rows", file=sys.stderr)
    return EXIT_OK


def cmd_inspect_kb(args) -> int:
    kb = _load(KnowledgeBase, args.kb, "knowledge base")
    s = kb.schema
    print(f"alpha: {kb.alpha:g}")
    print(f"OS features: {', '.join(s.os_features) or '-'}")
    print(f"software features: {', '.join(s.software_features) or '-'}")
    for kind, tables in (("os", kb.os_tables), ("software", kb.software_tables)):
        for label, rows in tables.items():
            for feature, row in rows.items():
                cells = " ".join(f"{v}={p:.4f}" for v, p in row.items())
                print(f"{kind} {label} {feature}: {cells}")
    if kb.has_exact_zeros():
        print("warning: knowledge base contains exact zero probabilities")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reconbelief", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-kb", help="estimate a knowledge base from labelled records")
    p.add_argument("records", help="CSV with header kind,label,<fields...>")
    p.add_argument("--schema", required=True)
    p.add_argument("--alpha", type=float, default=1.0, help="Laplace pseudocount (default 1)")
    p.add_argument("--out", required=True)
    p.add_argument("--ingest", help="ingest config for raw TTL / window columns")
    p.add_argument("--os-label", action="append", default=[], help="OS that gets a table without records")
    p.add_argument("--software-label", action="append", default=[])
    p.set_defaults(func=cmd_build_kb)

    p = sub.add_parser("update", help="fold observation streams into per-node beliefs")
    p.add_argument("--kb", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--observations", required=True)
    p.add_argument("--ingest")
    p.add_argument("--prior", help="prior document (default uniform)")
    p.add_argument("--node", help="only this address")
    p.add_argument("--wide", action="store_true")
    p.add_argument("--out-dir", help="write one trajectory CSV per node here")
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("run-scenario", help="replay a scenario and write report files")
    p.add_argument("scenario")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--wide", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, help="override the deception seed")
    p.set_defaults(func=cmd_run_scenario)

    p = sub.add_parser("inspect-kb", help="print a knowledge base")
    p.add_argument("kb")
    p.set_defaults(func=cmd_inspect_kb)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ReconBeliefError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
