"""
worker.py: block worker pool for the Monte-Carlo engine.

Responsibilities:
- Pull block indices from a shared queue on ``workers`` threads
- Run the block task (pure, deterministic) and push (index, result) to a result queue
- Abort the whole run on the first failure, naming the failing block
- Graceful shutdown of all threads when the queue drains or a block fails

Results come back in completion order; reduction order is the caller's business.
"""

import queue
import threading
import traceback
from typing import Any, Callable, List, Sequence, Tuple

from errors import ConfigError, EngineError
from logger_setup import get_logger
from timer_utils import Timer

logger = get_logger(__name__)

_STOP = object()


class BlockWorkerPool:
    def __init__(self, workers: int = 1, name: str = "repromc-worker"):
        if workers < 1:
            raise ConfigError(f"workers must be >= 1, got {workers}")
        self.workers = int(workers)
        self.name = name

    def _worker_loop(self, worker_id: int, task: Callable[[int], Any], jobs: queue.Queue,
                     results: queue.Queue, shutdown_event: threading.Event) -> None:
        logger.debug("%s[%d] started", self.name, worker_id)
        while not shutdown_event.is_set():
            index = jobs.get()
            if index is _STOP:
                break
            try:
                results.put((index, task(index), None))
            except Exception as exc:
                logger.error("%s[%d] block %d failed:\n%s", self.name, worker_id, index, traceback.format_exc())
                results.put((index, None, exc))
                shutdown_event.set()
        logger.debug("%s[%d] exit", self.name, worker_id)

    def map_blocks(self, task: Callable[[int], Any], indices: Sequence[int]) -> List[Tuple[int, Any]]:
        """Run task(index) for every index; return (index, result) pairs in completion order."""
        indices = list(indices)
        if not indices:
            return []
        jobs: queue.Queue = queue.Queue()
        results: queue.Queue = queue.Queue()
        shutdown_event = threading.Event()
        for index in indices:
            jobs.put(index)
        n_threads = min(self.workers, len(indices))
        for _ in range(n_threads):
            jobs.put(_STOP)

        threads = []
        for i in range(n_threads):
            t = threading.Thread(
                target=self._worker_loop,
                args=(i, task, jobs, results, shutdown_event),
                name=f"{self.name}-{i}",
                daemon=True,
            )
            threads.append(t)
            t.start()

        completed: List[Tuple[int, Any]] = []
        failure = None
        with Timer() as timer:
            while len(completed) < len(indices):
                index, result, exc = results.get()
                if exc is not None:
                    failure = (index, exc)
                    break
                completed.append((index, result))
        shutdown_event.set()
        for t in threads:
            t.join()
        if failure is not None:
            index, exc = failure
            raise EngineError(f"block {index} failed: {type(exc).__name__}: {exc}") from exc
        logger.debug("%d blocks on %d threads in %.3fs", len(indices), n_threads, timer.elapsed)
        return completed
