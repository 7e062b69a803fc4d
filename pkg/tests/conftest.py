import pytest

from diamondfwm.model import EnsembleConfig, default_rb87_rates, operating_point

# reference operating point (omega_a, omega_b, delta_1, delta_b, dw_i) at opd 150
REF_POINT = (33.0, 20.0, 39.0, 2.0, -21.0)


@pytest.fixture
def rates():
    return default_rb87_rates()


@pytest.fixture
def ens():
    return EnsembleConfig(opd=150.0, length=6e-3)


@pytest.fixture
def ref_point():
    return operating_point(*REF_POINT)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def check(number, title, ok, detail):
        line = f"criterion {number:2d}  {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        lines.append(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
