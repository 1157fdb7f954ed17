def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.ACCEPTANCE):
        ok, title, detail = mod.ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{k:2d}] {title}: {detail}")
