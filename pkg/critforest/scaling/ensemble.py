import logging
from multiprocessing import JoinableQueue, Process
from typing import Any, Callable, List, Sequence

from tqdm import tqdm

from critforest.scaling import settings

Task = Callable[..., Any]


class EnsembleRunner:
    """Runs `task(index, *args)` for every replica index and returns the results in index order.

    The task must be a module-level function so worker processes can unpickle it, and it must draw its randomness
    from child_rng(seed, index) so that the results do not depend on how indices are spread over workers.
    """

    def __init__(self, threads: int = None, progress: bool = False):
        self.threads = max(1, settings.THREADS if threads is None else threads)
        self.progress = progress
        self.logger = logging.getLogger(self.__class__.__name__)

    def run(self, task: Task, indices: Sequence[int], *args, desc: str = 'replicas') -> List[Any]:
        indices = list(indices)
        if self.threads == 1 or len(indices) < 2:
            return [task(index, *args) for index in tqdm(indices, disable=not self.progress, desc=desc)]

        task_queue = JoinableQueue()
        result_queue = JoinableQueue()
        for index in indices:
            task_queue.put((index, args))

        workers = min(self.threads, len(indices))
        self.logger.info(f'Running {len(indices)} {desc} on {workers} workers')
        processes = [Process(target=_worker, args=(task, task_queue, result_queue), daemon=True)
                     for _ in range(workers)]
        for process in processes:
            process.start()

        results, failures = {}, []
        for _ in tqdm(range(len(indices)), disable=not self.progress, desc=desc):
            index, ok, value = result_queue.get()
            result_queue.task_done()
            if ok:
                results[index] = value
            else:
                failures.append((index, value))

        for _ in processes:
            task_queue.put('STOP')
        task_queue.join()
        for process in processes:
            process.join()

        if failures:
            index, error = min(failures, key=lambda failure: failure[0])
            self.logger.error(f'{len(failures)} of {len(indices)} {desc} failed, first at index {index}')
            raise error
        return [results[index] for index in indices]

    def map(self, task: Task, count: int, *args, desc: str = 'replicas') -> List[Any]:
        return self.run(task, range(count), *args, desc=desc)


def _worker(task: Task, task_queue: JoinableQueue, result_queue: JoinableQueue):
    for index, args in iter(task_queue.get, 'STOP'):
        try:
            result_queue.put((index, True, task(index, *args)))
        except Exception as e:
            result_queue.put((index, False, e))
        task_queue.task_done()
    task_queue.task_done()
