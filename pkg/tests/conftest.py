import numpy as np
import pytest

from llglab.features import make_rng

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def rng():
    return make_rng(20240101)


def gaussian_split(T, T_oos, P, seed):
    g = make_rng(seed)
    return g.standard_normal((T, P)), g.standard_normal((T_oos, P))


def write_panel_csv(path, dates, columns: dict, fmt="{:.10g}"):
    names = list(columns)
    lines = ["date," + ",".join(names)]
    for i, d in enumerate(dates):
        cells = []
        for n in names:
            v = columns[n][i]
            cells.append("" if v is None or (isinstance(v, float) and np.isnan(v)) else fmt.format(v))
        lines.append(d + "," + ",".join(cells))
    path.write_text("\n".join(lines) + "\n")
    return path


def monthly_dates(start_year, n):
    return [f"{start_year + i // 12:04d}-{i % 12 + 1:02d}" for i in range(n)]
