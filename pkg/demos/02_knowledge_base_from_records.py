"""
Estimating a fingerprint knowledge base
=======================================

Labelled samples (which OS sent which TTL / window size) are counted into
Laplace-smoothed likelihood tables. With ``alpha = 0`` unseen values get
probability zero, and a single odd packet can then wipe out the true OS.
"""

import io

from reconbelief import (
    Configuration, IngestConfig, Observation, bayes_update, casestudy, estimate_kb, parse_records, uniform_belief,
)

schema = casestudy.schema()
records, report = parse_records(io.StringIO(casestudy.training_records_csv()), schema, IngestConfig())
print(f"{report.rows_kept} training records")

smoothed = estimate_kb(records, schema, alpha=1.0)
raw = estimate_kb(records, schema, alpha=0.0)
for os in casestudy.OS_LABELS:
    print(os, "smoothed:", smoothed.os_tables[os]["ttl_class"], "raw:", raw.os_tables[os]["ttl_class"])

###############################################################################
# A Windows host whose TTL was rewritten to 255 by a middlebox.

odd = Observation({"ttl_class": "255", "window_bin": "32768-65536"})
prior = uniform_belief(casestudy.space())
for name, kb in (("alpha=1", smoothed), ("alpha=0", raw)):
    post = bayes_update(prior, odd, kb)
    print(name, {c.label: round(p, 4) for c, p in post.items()}, "win:", post.mass(Configuration("win")))
