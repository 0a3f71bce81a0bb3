CRITERIA = {}


def record(number, name, ok, detail=""):
    CRITERIA[number] = (name, bool(ok), detail)
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(CRITERIA):
        name, ok, detail = CRITERIA[n]
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {n:>2}: {name}"
                      + (f"  ({detail})" if detail else ""))
