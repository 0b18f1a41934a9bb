# pufApp/utils/pool.py
from concurrent.futures import ThreadPoolExecutor


def ordered_map(fn, items, threads=1):
    """Map fn over items, returning results in input order whatever the thread count.

    Each item must carry its own seed; results never depend on scheduling.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, items))
