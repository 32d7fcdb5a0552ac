import re

ACCEPTANCE_FILE = "test_acceptance.py::"
CRITERION = re.compile(r"test_c(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter):
    lines = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if ACCEPTANCE_FILE not in nodeid or rep.when not in ("call", "setup"):
                continue
            match = CRITERION.search(nodeid)
            if not match:
                continue
            num, name = int(match.group(1)), match.group(2).replace("_", " ")
            detail = dict(rep.user_properties).get("detail", "")
            if rep.when == "setup" and outcome == "passed":
                continue
            status = "PASS" if outcome == "passed" else "FAIL"
            lines[num] = f"criterion {num:2d} {status}  {name}  {detail}".rstrip()
    if lines:
        terminalreporter.section("acceptance criteria")
        for num in sorted(lines):
            terminalreporter.write_line(lines[num])
