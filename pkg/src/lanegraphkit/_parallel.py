import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    """Worker count from ``LGK_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("LGK_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"LGK_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"LGK_THREADS must be >= 0, got {n}")
    return n or (os.cpu_count() or 1)


def row_chunks(n_rows: int, n_chunks: int) -> list[slice]:
    n_chunks = max(1, min(n_chunks, n_rows))
    bounds = [round(i * n_rows / n_chunks) for i in range(n_chunks + 1)]
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def map_rows(fn, n_rows: int):
    """Call ``fn(rows: slice)`` over disjoint row blocks, in order.

    Each block writes its own rows, so the result does not depend on the
    number of workers.
    """
    workers = thread_count()
    chunks = row_chunks(n_rows, workers)
    if len(chunks) <= 1:
        return [fn(s) for s in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))
