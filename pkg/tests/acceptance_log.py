"""Collects one verdict line per acceptance criterion for the terminal summary."""

LINES = []


def verdict(label, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
    LINES.append(line)
    print(line)
    assert ok, line
