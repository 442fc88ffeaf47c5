"""Collects one PASS/FAIL line per acceptance criterion."""

_LINES = {}


def record(number, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2}: {detail}"
    _LINES[number] = line
    print(line)
    return passed


def lines():
    return [_LINES[k] for k in sorted(_LINES)]
