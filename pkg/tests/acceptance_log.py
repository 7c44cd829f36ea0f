"""Shared record of acceptance outcomes, printed in the pytest summary."""

LINES = []


def record(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES.append(line)
    print(line)
    return ok
