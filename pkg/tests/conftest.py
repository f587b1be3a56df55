import pytest

# (number, title, passed, detail) recorded by the acceptance tests
ACCEPTANCE_RESULTS = []


@pytest.fixture
def acceptance():
    def record(number, title, passed, detail=""):
        ACCEPTANCE_RESULTS.append((number, title, bool(passed), detail))
        line = f"ACCEPTANCE {number:>2} {'PASS' if passed else 'FAIL'}: {title}" + (f" ({detail})" if detail else "")
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        line = f"{number:>2} {'PASS' if passed else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
