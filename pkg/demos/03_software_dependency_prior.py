"""
Priors with platform-dependent software
=======================================

Software availability depends on the OS: Paint.NET only ships for Windows,
and a Java application server needs a Java runtime. The chain rule turns
those conditionals into a prior over (OS, software set) configurations.
"""

from reconbelief import ConfigurationSpace, DependencyModel, chain_rule_prior, map_estimate

space = ConfigurationSpace(("win", "ubuntu"), ("paintnet", "jre", "tomcat"))
present = frozenset

conditional = {}
for os, p_paint, p_jre in (("win", 0.4, 0.5), ("ubuntu", 0.0, 0.6)):
    conditional["paintnet", (os, present())] = p_paint
    for before in (present(), present({"paintnet"})):
        conditional["jre", (os, before)] = p_jre
    for before in (present(), present({"paintnet"})):
        conditional["tomcat", (os, before)] = 0.0  # no runtime, no tomcat
        conditional["tomcat", (os, before | {"jre"})] = 0.3

dep = DependencyModel(("paintnet", "jre", "tomcat"), conditional)
prior = chain_rule_prior(space, {"win": 0.7, "ubuntu": 0.3}, dep)

for config, p in prior.items():
    if p > 0:
        print(f"{config.label:24s} {p:.4f}")
print("MAP:", map_estimate(prior))
