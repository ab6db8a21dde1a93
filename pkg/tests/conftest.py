import re

import numpy as np
import pytest

from mrfnet.model import SymmetricNetwork


def random_network(rng, p, scale=0.6, density=0.6, attractive=False, diagonal=True):
    entries = {}
    for s in range(p):
        for l in range(s, p):
            if l == s and not diagonal:
                continue
            if l == s or rng.random() < density:
                lo = 0.0 if attractive and l != s else -scale
                entries[(s, l)] = rng.uniform(lo, scale)
    return SymmetricNetwork(p, entries)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERION = re.compile(r"test_criterion_(\d+)_")


def pytest_terminal_summary(terminalreporter):
    lines = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call" and outcome != "error":
                continue
            m = _CRITERION.search(rep.nodeid)
            if m:
                lines[int(m.group(1))] = (outcome, rep.nodeid.split("::")[-1], rep.duration)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        outcome, name, dur = lines[k]
        tag = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {k}: {tag}  {name}  ({dur:.1f}s)")
