from abc import ABC, abstractmethod
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Optional

import pandas as pd

from app.exceptions import ConfigurationError

if TYPE_CHECKING:
    from app.experiments import RunResult

class RunObserver(ABC):
    """Abstract class for experiment run observers."""

    @abstractmethod
    def update(self, result: 'RunResult') -> None:
        """
        Handle a finished run (successful or failed).

        Args:
            result: The outcome of one simulation
        """
        pass

class LoggingObserver(RunObserver):
    """Observer that logs finished runs to file."""

    def update(self, result: 'RunResult') -> None:
        """Log run details."""
        if result is None:
            raise AttributeError("Result cannot be None")
        if result.ok:
            logging.info(
                f"Run finished: {result.label} on {result.problem_id}: "
                f"regime {result.summary.regime.regime_id}, "
                f"final gap {result.summary.extra['final_value_gap']:.3e}"
            )
        else:
            logging.warning(f"Run failed: {result.label} on {result.problem_id}: {result.error}")

class CsvCollectorObserver(RunObserver):
    """
    Single collector of run artifacts.

    Writes one trajectory CSV and one key=value report per successful run and
    keeps a summary row for every run. Runs are delivered by the runner in
    submission order, so the files never interleave.
    """

    def __init__(self, out_dir: Path, encoding: str = 'utf-8'):
        self.out_dir = Path(out_dir)
        self.encoding = encoding
        self.rows: List[Dict[str, Any]] = []
        self.written: List[Path] = []
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ConfigurationError(f"Output directory not writable: {out_dir}: {e}") from e

    def update(self, result: 'RunResult') -> None:
        """Write artifacts of one run."""
        if result is None:
            raise AttributeError("Result cannot be None")
        from app.diagnostics import format_report
        from app.experiments import trajectory_frame
        self.rows.append(result.to_row())
        if not result.ok:
            return
        stem = result.file_stem
        csv_path = self.out_dir / f"trajectory_{stem}.csv"
        trajectory_frame(result.trajectory).to_csv(
            csv_path, index=False, float_format='%.17g', encoding=self.encoding
        )
        report_path = self.out_dir / f"report_{stem}.txt"
        report_path.write_text(format_report(result.summary.to_dict()), encoding=self.encoding)
        self.written.extend([csv_path, report_path])
        logging.info(f"Artifacts written for {result.label}: {csv_path.name}, {report_path.name}")

    def write_summary(self, name: str) -> Optional[Path]:
        """Write the combined per-sweep CSV; returns None when nothing was collected."""
        if not self.rows:
            return None
        path = self.out_dir / f"{name}.csv"
        pd.DataFrame(self.rows).to_csv(path, index=False, float_format='%.17g', encoding=self.encoding)
        self.written.append(path)
        logging.info(f"Summary written: {path}")
        return path
