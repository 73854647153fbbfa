from dataclasses import dataclass

import pytest

from homphase.config import load_config, scenario_dir
from homphase.grids import conjugate_delay_grid
from homphase.model import visibility

# Pass/fail lines recorded by the acceptance module, echoed after the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@dataclass(frozen=True)
class Scenario:
    cfg: object
    grid: object
    delay: object
    spectrum: object
    beta: object
    V: object

    @property
    def z(self):
        return self.cfg.medium.length_km


def build_scenario(name: str) -> Scenario:
    cfg = load_config(scenario_dir() / f"{name}.cfg")
    grid = cfg.frequency_grid()
    spectrum = cfg.spectrum(grid)
    beta = cfg.phase_constant(grid)
    V = visibility(spectrum, beta, cfg.medium.length_km)
    return Scenario(cfg, grid, conjugate_delay_grid(grid), spectrum, beta, V)


@pytest.fixture(scope="session")
def fig4():
    return build_scenario("fig4_gaussian_gs")


@pytest.fixture(scope="session")
def fig7():
    return build_scenario("fig7_hg3_cosine")
