"""Per-criterion outcomes collected while the acceptance module runs."""

RESULTS: dict[int, list[tuple[str, str, str]]] = {}


def record(criterion: int, test: str, outcome: str, detail: str) -> None:
    RESULTS.setdefault(criterion, []).append((test, outcome, detail))
