def pytest_terminal_summary(terminalreporter):
    # repeat the acceptance PASS/FAIL lines, which pytest captures, at the end of the run
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call" or "test_acceptance" not in rep.nodeid:
                continue
            for title, content in rep.sections:
                if "stdout" in title:
                    lines += [ln for ln in content.splitlines() if " criterion " in ln]
    if lines:
        terminalreporter.section("acceptance criteria")
        for ln in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(ln)
