import sys
from pathlib import Path

from hypothesis import settings, strategies as st

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from lshrendezvous.core import ProblemInstance  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@st.composite
def instances(draw, min_n=2, max_n=16):
    """Random feasible two-user instance over N channels."""
    n = draw(st.integers(min_n, max_n))
    labels = draw(st.permutations(range(n)))
    u = draw(st.integers(1, n))
    n12 = draw(st.integers(1, u))
    n1 = draw(st.integers(n12, u))
    n2 = u - n1 + n12
    common, rest = labels[:n12], labels[n12:u]
    a1, a2 = rest[: n1 - n12], rest[n1 - n12 :]
    return ProblemInstance.of(n, common + a1, common + a2)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.REPORT, key=lambda s: int(s.split("criterion")[1].split()[0])):
        terminalreporter.write_line(line)
