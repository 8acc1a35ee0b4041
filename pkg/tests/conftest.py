import numpy as np
import pytest

import graphonkit.basis
import graphonkit.gw
import graphonkit.oracle
from graphonkit.gw import TOL_MARGINAL, marginal_error

# every plan produced anywhere in the run is checked here; a violation fails the calling test
PLAN_AUDIT = {"checked": 0, "worst": 0.0, "violations": 0}

_solve = graphonkit.gw.solve_gw


def _audited_solve(*args, **kwargs):
    res = _solve(*args, **kwargs)
    plan = res.plan
    err = marginal_error(plan.matrix, plan.row_marginal.weights, plan.col_marginal.weights)
    PLAN_AUDIT["checked"] += 1
    PLAN_AUDIT["worst"] = max(PLAN_AUDIT["worst"], err)
    if err > TOL_MARGINAL or (plan.matrix < 0).any():
        PLAN_AUDIT["violations"] += 1
        raise AssertionError(f"plan violates its marginals by {err:.3g}")
    return res


for _mod in (graphonkit.gw, graphonkit.oracle, graphonkit.basis):
    _mod.solve_gw = _audited_solve


@pytest.fixture(scope="session", autouse=True)
def warm_jit():
    # first call compiles the jitted solver (cached on disk afterwards)
    u = np.full(2, 0.5)
    graphonkit.gw.solve_gw(np.eye(2), u, 1 - np.eye(2), u)


@pytest.fixture
def plan_audit():
    return PLAN_AUDIT


# one (number, verdict line) entry per acceptance criterion, printed after the run
ACCEPTANCE = []


@pytest.fixture
def acceptance_report():
    def report(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title}: {detail}"
        print(line)
        ACCEPTANCE.append((number, line))
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
    terminalreporter.write_line(
        f"transport plans audited: {PLAN_AUDIT['checked']}, worst marginal error "
        f"{PLAN_AUDIT['worst']:.2e}, violations {PLAN_AUDIT['violations']}")
