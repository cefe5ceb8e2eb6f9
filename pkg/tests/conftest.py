import pytest


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance_log(request):
    """Collects one verdict line per acceptance criterion for the terminal summary."""
    lines = request.config._acceptance_lines

    def record(number, title, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {title} ({detail})"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
