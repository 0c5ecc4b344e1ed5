"""
Obfuscating fingerprints
========================

A defender rewrites the window size of outgoing Ubuntu packets so that they
look like macOS traffic. The attacker needs more observations to reach 0.9
on the truth, or never gets there.
"""

from reconbelief import (
    Configuration, DeceptionRewrite, DeceptionRule, GroundTruth, NodeIdentity, Observation, apply_deception,
    casestudy, run_scenario, uniform_belief,
)

kb = casestudy.knowledge_base()
node = NodeIdentity.of("192.168.10.19")
streams = {node: [Observation({"ttl_class": "64", "window_bin": "8192-32768"})] * 60}
priors = {node: uniform_belief(casestudy.space())}
truth = GroundTruth({node: Configuration("ubuntu")})

for p in (0.0, 0.1, 0.2, 0.3, 0.5):
    rule = DeceptionRule("window_bin", "32768-65536", {"8192-32768"}, probability=p)
    deceived = apply_deception(streams, DeceptionRewrite((rule,), seed=2024), kb.schema)
    result = run_scenario(kb, deceived, priors, truth).per_node[node]
    needed = "never reaches 0.9" if result.obs_to_threshold is None else f"0.9 after {result.obs_to_threshold} observations"
    print(f"rewrite probability {p:.1f}: {needed}, final mass on ubuntu {result.truth_probability:.4f}")
