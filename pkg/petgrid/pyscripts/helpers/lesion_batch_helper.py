"""
This module provides concurrent per-lesion processing for the petgrid pipeline.

Key components:
- LesionTask / LesionTaskResult: Data structures for one lesion's work and outcome
- LesionBatchManager: Runs tasks on a thread pool, isolates failures and logs progress
"""

import logging
import threading
import time
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

from ..types.errors import StageFailure
from ..utils.common_utils import setup_logger

# Default configuration values
DEFAULT_CONCURRENCY = 4
DEFAULT_LOGGING_INTERVAL = 1

STATUS_OK = "ok"
STATUS_FAILED = "failed"


@dataclass
class LesionTask:
    """
    One lesion to segment, crop and encode.

    Attributes:
        index (int): Position of the task in the batch; results are returned in this order.
        exam_id (str): Exam the lesion belongs to.
        lesion_index (int): Index of the record within its exam.
        key (str): Content-addressed lesion key used for output file names.
        payload (Any): Stage inputs (record, volumes, parameters).
    """

    index: int
    exam_id: str
    lesion_index: int
    key: str
    payload: Any = field(default=None, repr=False)


@dataclass
class LesionTaskResult:
    """
    Outcome of one LesionTask.

    Attributes:
        index (int): The index of the task.
        exam_id (str): Exam the lesion belongs to.
        lesion_index (int): Index of the record within its exam.
        key (str): Lesion key.
        status (str): "ok" or "failed".
        output (dict | None): Processor output if successful.
        stage (str | None): Stage that failed, if any.
        error (str | None): Error message, if any.
        processing_time_seconds (float | None): Time spent on this task.
    """

    index: int
    exam_id: str
    lesion_index: int
    key: str
    status: str
    output: dict | None = None
    stage: str | None = None
    error: str | None = None
    processing_time_seconds: float | None = None

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


class LesionCounter:
    """
    Thread-safe counter for completed tasks.
    """

    def __init__(self):
        self.value = 0
        self._lock = threading.Lock()

    def increment(self) -> int:
        """Increment the counter value and return it."""
        with self._lock:
            self.value += 1
            return self.value


class LesionBatchManager:
    """
    Manager for concurrent lesion processing.

    Key features:
    - Controls concurrent execution
    - Monitors progress and isolates per-lesion errors
    - Returns results in task order regardless of completion order
    """

    def __init__(
        self,
        processor: Callable[[LesionTask], dict],
        concurrency: int = DEFAULT_CONCURRENCY,
        logging_interval: int = DEFAULT_LOGGING_INTERVAL,
        log_level: int | str = logging.INFO,
    ):
        """
        Initialize the LesionBatchManager.

        Args:
            processor (Callable[[LesionTask], dict]): Runs all stages for one task; raises StageFailure on error.
            concurrency (int): Number of worker threads.
            logging_interval (int): The interval for logging progress.
            log_level (int | str): The logging level for the manager.
        """
        self.processor = processor
        self.concurrency = max(1, int(concurrency))
        self.logging_interval = max(1, int(logging_interval))
        self.logger = setup_logger('LesionBatchManager', level=log_level)
        self.logger.info(f"Initialized LesionBatchManager with concurrency: {self.concurrency}")

    def run(self, tasks: list[LesionTask]) -> list[LesionTaskResult]:
        """
        Process all tasks.

        Args:
            tasks (list[LesionTask]): Tasks to run.

        Returns:
            list[LesionTaskResult]: One result per task, sorted by task index.
        """
        if not tasks:
            self.logger.info("No lesion tasks to process")
            return []

        self.logger.info(f"Starting lesion processing for {len(tasks)} tasks")
        counter = LesionCounter()
        start_time = time.perf_counter()
        if self.concurrency == 1:
            results = [self._process_task(task, counter, start_time) for task in tasks]
        else:
            with ThreadPoolExecutor(max_workers=self.concurrency, thread_name_prefix="petgrid-lesion") as executor:
                results = list(executor.map(lambda t: self._process_task(t, counter, start_time), tasks))

        failed = sum(1 for r in results if not r.ok)
        self.logger.info(f"Completed lesion processing for {len(tasks)} tasks ({failed} failed)")
        return sorted(results, key=lambda r: r.index)

    def _process_task(self, task: LesionTask, counter: LesionCounter, start_time: float) -> LesionTaskResult:
        """
        Process a single task.

        Args:
            task (LesionTask): The task to process.
            counter (LesionCounter): Counter for tracking progress.
            start_time (float): The start time of the batch.

        Returns:
            LesionTaskResult: The result object containing the output or error information.
        """
        task_start_time = time.perf_counter()
        try:
            self.logger.debug(f"Starting lesion {task.key}")
            output = self.processor(task)
            processing_time_seconds = round(time.perf_counter() - task_start_time, 2)
            result = LesionTaskResult(
                index=task.index,
                exam_id=task.exam_id,
                lesion_index=task.lesion_index,
                key=task.key,
                status=STATUS_OK,
                output=output,
                processing_time_seconds=processing_time_seconds,
            )
            self.logger.info(f"Completed lesion {task.key} in {processing_time_seconds:.2f} seconds")
        except Exception as e:  # pylint: disable=broad-exception-caught
            result = self._handle_error(e, task, round(time.perf_counter() - task_start_time, 2))

        done = counter.increment()
        if done % self.logging_interval == 0:
            elapsed_time = time.perf_counter() - start_time
            self.logger.info(f"Processed total {done} lesions in {elapsed_time:.2f} seconds.")
        return result

    def _handle_error(self, e: Exception, task: LesionTask, processing_time_seconds: float) -> LesionTaskResult:
        """Turn an exception into a failed result."""
        stage = e.stage if isinstance(e, StageFailure) else "unknown"
        cause = e.cause if isinstance(e, StageFailure) else e
        error_message = f"{type(cause).__name__}: {cause}"
        self.logger.error(f"Lesion {task.key} failed at stage '{stage}': {error_message}")
        return LesionTaskResult(
            index=task.index,
            exam_id=task.exam_id,
            lesion_index=task.lesion_index,
            key=task.key,
            status=STATUS_FAILED,
            stage=stage,
            error=error_message,
            processing_time_seconds=processing_time_seconds,
        )
