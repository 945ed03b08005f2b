import pytest

from rdbp.dists import ConstantResource, Exponential, Poisson, Uniform
from rdbp.society import SubPopulationSpec


def worked_specs(m_h=2.0, r_h=0.9, m_i=3.0, r_i=0.5):
    home = SubPopulationSpec("h", Poisson(m_h), ConstantResource(r_h), Uniform(0.0, 1.0))
    imm = SubPopulationSpec("i", Poisson(m_i), ConstantResource(r_i), Exponential(1.0))
    return home, imm


@pytest.fixture
def worked():
    return worked_specs()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])
