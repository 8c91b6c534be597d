import concurrent.futures
from typing import Callable, Iterable, List, Optional, TypeVar

from src.core.settings import worker_count

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(fn: Callable[[T], R], items: Iterable[T], max_workers: Optional[int] = None) -> List[R]:
    """
    线程池并发执行 fn，结果按输入顺序返回（与调度顺序无关）。
    第一个失败的任务会在收集阶段重新抛出。
    """
    items = list(items)
    if not items:
        return []
    workers = max_workers or worker_count()
    if workers <= 1 or len(items) == 1:
        return [fn(item) for item in items]

    results: List[Optional[R]] = [None] * len(items)
    with concurrent.futures.ThreadPoolExecutor(max_workers=min(workers, len(items))) as executor:
        future_to_index = {executor.submit(fn, item): idx for idx, item in enumerate(items)}
        for future in concurrent.futures.as_completed(future_to_index):
            results[future_to_index[future]] = future.result()
    return results  # type: ignore[return-value]
