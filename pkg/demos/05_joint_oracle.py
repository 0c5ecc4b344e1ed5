"""
When is the per-node update exact?
==================================

The engine keeps one belief per node. That equals the full joint posterior
over all network configurations whenever the prior factorizes. A prior that
couples nodes (say, a site standardised on one OS) breaks it.
"""

import numpy as np

from reconbelief import (
    Configuration, JointBelief, NetworkBelief, NodeIdentity, Observation, casestudy, enumerate_space,
    joint_update_oracle, uniform_belief, update_network,
)

kb = casestudy.knowledge_base()
space = casestudy.space()
a, b = NodeIdentity.of("10.0.0.1"), NodeIdentity.of("10.0.0.2")
streams = {a: [Observation({"ttl_class": "128"})] * 2, b: [Observation({"ttl_class": "64"})]}

net = NetworkBelief({a: uniform_belief(space), b: uniform_belief(space)})
factored = update_network(net, streams, kb)
joint = joint_update_oracle(JointBelief.from_network(net), streams, kb)
print("independent prior, node b:")
print("  per-node:", {c.label: round(p, 6) for c, p in factored.per_node[b].items()})
print("  joint:   ", {c.label: round(p, 6) for c, p in joint.marginal(b).items()})

###############################################################################
# Both hosts run the same OS with certainty.

configs = tuple(enumerate_space(space))
coupled = JointBelief((a, b), (configs, configs), np.eye(3) / 3)
print("coupled prior, node b:", {c.label: round(p, 4) for c, p in joint_update_oracle(coupled, streams, kb).marginal(b).items()})
print("mass on win for b rose because a looks like Windows:",
      joint_update_oracle(coupled, streams, kb).marginal(b)[Configuration("win")] > 1 / 3)
