"""Replicate execution: serial or through a process pool, records in task order."""
import multiprocessing
import sys
import time
from functools import partial

from core.libs.errors import ReplicateFailureError
from core.libs.pointcloud import substream_key

MAX_FAILURE_FRACTION = 0.10


def run_guarded(func, timings, task):
    """One replicate; any exception becomes an error record instead of propagating."""
    stage, param, replicate = task
    start = time.perf_counter()
    try:
        record = dict(func(task))
    except Exception as e:
        record = {"stage": stage, "param": param, "replicate": replicate,
                  "error": f"{type(e).__name__}: {e}"}
    if timings:
        record["wall_time"] = time.perf_counter() - start
    return record


class ReplicateRunner:
    """Callable mapper handed to the estimator drivers.

    Every record is stamped with the experiment id, seed and substream key
    and passed to the writer as it arrives; ordered `imap` keeps the output
    identical for any worker count.
    """

    def __init__(self, experiment_id, seed, workers=1, writer=None, logger=None, timings=False,
                 max_failure_fraction=MAX_FAILURE_FRACTION):
        self.experiment_id = experiment_id
        self.seed = int(seed)
        self.workers = max(1, int(workers))
        self.writer = writer
        self.logger = logger
        self.timings = timings
        self.max_failure_fraction = max_failure_fraction
        self.total = 0
        self.failures = 0

    def _stamp(self, record):
        record["experiment"] = self.experiment_id
        record["seed"] = self.seed
        record["substream"] = substream_key(record.get("replicate", 0), record.get("stage", 0))
        return record

    def _results(self, func, tasks):
        job = partial(run_guarded, func, self.timings)
        if self.workers == 1 or len(tasks) < 2:
            for task in tasks:
                yield job(task)
            return
        with multiprocessing.Pool(self.workers) as pool:
            chunk = max(1, len(tasks) // (4 * self.workers))
            yield from pool.imap(job, tasks, chunksize=chunk)

    def __call__(self, func, tasks):
        tasks = list(tasks)
        records = []
        for record in self._results(func, tasks):
            record = self._stamp(record)
            if "error" in record:
                self.failures += 1
                print(f"[HARNESS] replicate {record['replicate']} (stage {record['stage']}) failed: "
                      f"{record['error']}", file=sys.stderr)
                if self.logger:
                    self.logger.log_event("replicate_failed", {"experiment": self.experiment_id,
                                                               "replicate": record["replicate"],
                                                               "error": record["error"]})
            if self.writer is not None:
                self.writer.write(record)
            records.append(record)
        self.total += len(records)
        if self.total and self.failures > self.max_failure_fraction * self.total:
            raise ReplicateFailureError(
                f"{self.failures} of {self.total} replicates failed (limit {self.max_failure_fraction:.0%})")
        return records

    @property
    def failure_fraction(self):
        return self.failures / self.total if self.total else 0.0
