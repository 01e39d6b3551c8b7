"""
In-memory run queue executing independent experiment runs on worker threads
"""
import threading
from queue import Queue, Empty
from typing import Callable, Dict, Any, List, Optional
from datetime import datetime
import logging

logger = logging.getLogger(__name__)


class RunQueue:
    """
    In-memory FIFO queue of runs.
    Each run executes on one worker thread; runs share no mutable state.
    """

    def __init__(self, max_workers: int = 1):
        """
        Initialize the run queue

        Args:
            max_workers: Number of concurrent workers
        """
        self.queue = Queue()
        self.max_workers = max(1, max_workers)
        self.workers = []
        self.running = False
        self.active_runs: Dict[str, Dict[str, Any]] = {}
        self._lock = threading.Lock()

    def start(self):
        """Start the queue workers"""
        if self.running:
            logger.warning("Queue workers already running")
            return

        self.running = True
        for i in range(self.max_workers):
            worker = threading.Thread(
                target=self._worker,
                name=f"RunQueueWorker-{i}",
                daemon=True
            )
            worker.start()
            self.workers.append(worker)
        logger.info(f"Started {self.max_workers} run worker(s)")

    def stop(self):
        """Stop the queue workers"""
        self.running = False
        for worker in self.workers:
            worker.join(timeout=5)
        self.workers.clear()
        logger.info("Stopped run workers")

    def join(self):
        """Block until every queued run has finished"""
        self.queue.join()

    def add_run(self, run_id: str, run_func: Callable, *args, **kwargs):
        """
        Add a run to the queue

        Args:
            run_id: Unique identifier for the run
            run_func: Function to execute
            *args: Positional arguments for run_func
            **kwargs: Keyword arguments for run_func
        """
        run = {
            'run_id': run_id,
            'func': run_func,
            'args': args,
            'kwargs': kwargs,
            'added_at': datetime.now().isoformat()
        }

        with self._lock:
            self.active_runs[run_id] = {
                'status': 'queued',
                'added_at': run['added_at'],
                'started_at': None,
                'completed_at': None
            }

        self.queue.put(run)
        logger.debug(f"Run {run_id} added to queue. Queue size: {self.queue.qsize()}")

    def get_run_info(self, run_id: str) -> Optional[Dict[str, Any]]:
        with self._lock:
            info = self.active_runs.get(run_id)
            return dict(info) if info else None

    def failed_runs(self) -> List[str]:
        """Identifiers of runs that raised, in submission order"""
        with self._lock:
            return [run_id for run_id, info in self.active_runs.items() if info['status'] == 'failed']

    def _set_status(self, run_id: str, status: str, **fields):
        with self._lock:
            if run_id in self.active_runs:
                self.active_runs[run_id]['status'] = status
                self.active_runs[run_id].update(fields)

    def _worker(self):
        """Worker thread that processes runs from the queue"""
        logger.debug(f"Worker {threading.current_thread().name} started")

        while self.running:
            try:
                run = self.queue.get(timeout=0.1)
            except Empty:
                continue

            run_id = run['run_id']
            self._set_status(run_id, 'processing', started_at=datetime.now().isoformat())
            logger.info(f"Processing run {run_id}")

            try:
                result = run['func'](*run['args'], **run['kwargs'])
                self._set_status(run_id, 'completed', result=result, completed_at=datetime.now().isoformat())
                logger.info(f"Run {run_id} completed")

            except Exception as e:
                self._set_status(run_id, 'failed', error=str(e), completed_at=datetime.now().isoformat())
                logger.error(f"Run {run_id} failed: {e}", exc_info=True)

            finally:
                self.queue.task_done()

        logger.debug(f"Worker {threading.current_thread().name} stopped")
