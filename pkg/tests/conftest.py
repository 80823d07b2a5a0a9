import pytest

from finecap.synthetic import make_workdir

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def workdir(tmp_path):
    make_workdir(tmp_path, n_moments=20, seed=0)
    return tmp_path


class Scripted:
    """Chat backend replying with canned texts in order; records the prompts."""

    model = "scripted"

    def __init__(self, *replies):
        self.replies = list(replies)
        self.prompts = []

    def complete(self, role, req):
        self.prompts.append((role, req.user))
        reply = self.replies.pop(0) if self.replies else ""
        if isinstance(reply, Exception):
            raise reply
        return reply, 1
