"""Collects per-criterion clause outcomes for the end-of-run summary."""

from __future__ import annotations

RESULTS: dict = {}


def record(criterion: int, clause: str, ok: bool, detail: str = "") -> bool:
    """Store one clause outcome, echo it and return ``ok``."""
    RESULTS.setdefault(criterion, []).append((clause, bool(ok), detail))
    print(f"criterion {criterion} [{clause}] {'PASS' if ok else 'FAIL'} {detail}")
    return bool(ok)


def summary_lines() -> list:
    lines = []
    for c in sorted(RESULTS):
        clauses = RESULTS[c]
        failed = [name for name, ok, _ in clauses if not ok]
        status = "FAIL" if failed else "PASS"
        tail = f" (failing: {', '.join(failed)})" if failed else f" ({len(clauses)} clauses)"
        lines.append(f"criterion {c:2d}: {status}{tail}")
    return lines
