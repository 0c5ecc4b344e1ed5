import pytest

from reconbelief import ConfigurationSpace, FeatureSchema, KnowledgeBase

_acceptance_results = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion from the build contract")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _acceptance_results.append((marker.args[0], marker.args[1], rep.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome in sorted(_acceptance_results):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {title}")


@pytest.fixture
def three_os_space():
    return ConfigurationSpace(("win", "ubuntu", "mac"))


@pytest.fixture
def tiny_kb():
    schema = FeatureSchema(("ttl_class",), ("banner",), {"ttl_class": ("64", "128", "255"), "banner": ("a", "b")})
    os_tables = {
        "o": {"ttl_class": {"64": 0.5, "128": 0.3, "255": 0.2}},
        "p": {"ttl_class": {"64": 0.8, "128": 0.1, "255": 0.1}},
    }
    sw_tables = {
        "s1": {"banner": {"a": 0.4, "b": 0.6}},
        "s2": {"banner": {"a": 0.3, "b": 0.7}},
    }
    return KnowledgeBase(schema, os_tables, sw_tables, alpha=1.0)
