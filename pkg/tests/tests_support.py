"""Shared state for the acceptance suite's summary lines."""

CRITERIA = {}


def record(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    CRITERIA[number] = line
    print(line)
