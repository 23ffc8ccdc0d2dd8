import json
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def nilsimsa_vectors():
    with open(DATA / "nilsimsa_vectors.json") as fh:
        return [(bytes.fromhex(v["hex_input"]), v["digest"]) for v in json.load(fh)]


# -- acceptance criteria reporting ------------------------------------------------------------
# Tests marked ``@pytest.mark.criterion("name")`` get one PASS/FAIL line in the
# terminal summary, with whatever the test wrote into the ``detail`` fixture.

_DETAIL = pytest.StashKey[dict]()
_LINES = pytest.StashKey[list]()


@pytest.fixture
def detail(request):
    d = {}
    request.node.stash[_DETAIL] = d
    return d


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    facts = item.stash.get(_DETAIL, {})
    text = ", ".join(f"{k}={v}" for k, v in facts.items())
    status = "PASS" if rep.passed else "FAIL"
    line = f"{status}  {marker.args[0]}" + (f"  ({text})" if text else "")
    item.config.stash.setdefault(_LINES, []).append(line)


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
