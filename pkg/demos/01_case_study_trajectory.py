"""
Belief trajectory of an Ubuntu host
===================================

An attacker sniffs fifteen packets from 192.168.10.19. Ubuntu and macOS
both start at TTL 64 and the window size only slightly favours Ubuntu, so
the belief creeps toward the truth instead of jumping to it.
"""

from reconbelief import NodeIdentity, casestudy, map_estimate, parse_stream, uniform_belief, update_stream

kb = casestudy.knowledge_base()
parsed = parse_stream(casestudy.observations_csv().encode(), casestudy.INGEST, kb.schema)
stream = parsed.streams[NodeIdentity.of("192.168.10.19")]

# raw TTLs 64, 63, 62 all snap to the canonical class 64
print(stream[0].values, stream[1].values)

###############################################################################
# Start from a uniform prior over the three OS hypotheses and fold the stream.

trajectory = update_stream(uniform_belief(casestudy.space()), stream, kb)
print(trajectory.to_csv(wide=True, fmt=lambda p: f"{p:.4f}"))

###############################################################################
# The MAP estimate after the last observation.

print(map_estimate(trajectory.final))
