import sys


def pytest_terminal_summary(terminalreporter):
    # echo the acceptance-criteria lines after the run so they are visible
    # without -s; the module registers them as its tests execute
    for name, module in sys.modules.items():
        if name.rpartition(".")[2] == "test_acceptance":
            lines = getattr(module, "ACCEPTANCE_LINES", None)
            if lines:
                terminalreporter.section("acceptance criteria")
                for line in lines:
                    terminalreporter.write_line(line)
            break
