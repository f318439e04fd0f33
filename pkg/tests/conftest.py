import pytest

from paley_sos.paley import build_paley


@pytest.fixture(scope="session")
def paley():
    cache = {}

    def get(p):
        if p not in cache:
            cache[p] = build_paley(p)
        return cache[p]

    return get


ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def record(criterion: int, part: str, passed: bool, detail: str) -> None:
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        verdict = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        body = "; ".join(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})" for name, ok, detail in parts)
        terminalreporter.write_line(f"CRITERION {n} {verdict} | {body}")
