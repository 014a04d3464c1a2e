ACCEPTANCE_LINES = []


def record(criterion: int, title: str, passed: bool, detail: str) -> str:
    line = "criterion %d %s: %s (%s)" % (criterion, "PASS" if passed else "FAIL", title, detail)
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
