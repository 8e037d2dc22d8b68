"""Collects one PASS/FAIL line per acceptance criterion for the run summary."""

LINES: list[str] = []


def verdict(criterion: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    LINES.append(line)
    print(line)
    assert ok, line
