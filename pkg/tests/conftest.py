"""Shared pytest wiring: one summary line per acceptance criterion.

Acceptance tests are named test_criterion_<number><subtag>_<slug>; every
phase outcome is collected here and folded into a single PASS/FAIL line
per criterion at the end of the run.
"""

import re

_CRITERION = re.compile(r"test_acceptance.*::test_criterion_(\d+)([a-z]?)_")

_LABELS = {
    1: "analytic gradients match finite differences",
    2: "batch Cox loss matches the enumeration oracle",
    3: "c-index matches the pair-enumeration oracle",
    4: "masked reconstruction loss semantics",
    5: "modality dropout retention law",
    6: "fused model recovers synthetic risk",
    7: "training-regime and robustness trends",
    8: "parameter footprint ordering and exact counts",
    9: "byte-deterministic CLI workflows",
}

_outcomes: list[tuple[int, str, str]] = []


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if m is None:
        return
    # record the call phase, plus any phase that did not pass (a fixture
    # error or skip must still fail the criterion line)
    if report.when == "call" or report.outcome != "passed":
        _outcomes.append((int(m.group(1)), m.group(2), report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    grouped: dict[int, list[tuple[str, str]]] = {}
    for num, sub, outcome in _outcomes:
        grouped.setdefault(num, []).append((sub, outcome))
    terminalreporter.section("acceptance criteria")
    for num in sorted(grouped):
        parts = sorted(grouped[num])
        ok = all(outcome == "passed" for _, outcome in parts)
        detail = ""
        if len({sub for sub, _ in parts}) > 1:
            detail = " (" + ", ".join(
                f"{num}{sub} {'PASS' if outcome == 'passed' else outcome.upper()}"
                for sub, outcome in parts) + ")"
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(
            f"criterion {num} {verdict}: {_LABELS.get(num, 'unlabeled')}{detail}")
