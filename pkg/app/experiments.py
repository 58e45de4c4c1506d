"""
Experiment harness: single runs, parameter sweeps and figure reproduction.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from app.diagnostics import (
    DiagnosticsSummary,
    EnergyConfig,
    energy_series,
    format_report,
    summarize,
    w_series,
)
from app.dynamics import Params, validate
from app.exceptions import ConfigurationError, IntegrationError, SolverError, ValidationError
from app.flow_config import ExperimentConfig, FlowConfig
from app.integrator import IntegratorConfig, SelfTestReport, Trajectory, integrate, self_test
from app.observers import CsvCollectorObserver, LoggingObserver, RunObserver
from app.problems import Problem, ProblemFactory
from app.regimes import RegimeReport, classify_regime

# Fixed SVG ids and no date stamp keep plot files reproducible
matplotlib.rcParams['svg.hashsalt'] = 'flow'

# Steps above about 0.45 leave the stability interval of the fast mode of quad:5,1
FIGURE_MAX_STEP = 0.1

FIGURE_PRESETS: Dict[str, Tuple[str, Tuple[float, ...]]] = {
    'fig1': ('q', (0.3, 0.5, 0.7, 0.9, 0.99)),
    'fig2': ('p', (0.5, 1.0, 1.4, 1.7, 1.9)),
}

SUMMARY_COLUMNS = [
    'label', 'sweep_value', 'status', 'regime', 'mode', 'value_exponent', 'velocity_exponent',
    'final_value_gap', 'final_dist_to_xstar', 'final_speed', 'value_slope', 'speed_slope',
    'rates_ok', 'w_descent_ok', 'accepted_steps', 'rejected_steps', 'rhs_evals', 'error',
]


def _energy_config(params: Params) -> Optional[EnergyConfig]:
    """Default energy coefficients, or None when no admissible Gronwall coefficient exists."""
    try:
        return EnergyConfig.default(params)
    except ValidationError:
        return None


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    """Samples as t,x_1..x_d,v_1..v_d,value_gap,speed,dist_to_xstar,energy_E,energy_W."""
    d = traj.problem.dimension
    columns: Dict[str, Any] = {'t': traj.times}
    for i in range(d):
        columns[f"x_{i + 1}"] = traj.xs[:, i]
    for i in range(d):
        columns[f"v_{i + 1}"] = traj.vs[:, i]
    columns['value_gap'] = traj.value_gap
    columns['speed'] = traj.speed
    columns['dist_to_xstar'] = traj.dist_to_xstar
    cfg = _energy_config(traj.params)
    columns['energy_E'] = energy_series(traj, cfg) if cfg is not None else np.full(len(traj), np.nan)
    columns['energy_W'] = w_series(traj)
    return pd.DataFrame(columns)


@dataclass(eq=False)
class RunResult:
    """Outcome of one simulation inside a run or sweep."""
    label: str
    problem_id: str
    params: Params
    sweep_value: Optional[float] = None
    trajectory: Optional[Trajectory] = None
    summary: Optional[DiagnosticsSummary] = None
    error: Optional[str] = None
    error_kind: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def file_stem(self) -> str:
        return self.label.replace('=', '_').replace(':', '_').replace(',', '_')

    def to_row(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {column: None for column in SUMMARY_COLUMNS}
        row.update(label=self.label, sweep_value=self.sweep_value,
                   status='ok' if self.ok else 'failed', error=self.error)
        if self.summary is not None:
            for key, value in self.summary.to_dict().items():
                if key in row:
                    row[key] = value
            row['regime'] = self.summary.regime.regime_id
        if self.trajectory is not None:
            row['accepted_steps'] = self.trajectory.accepted_steps
            row['rejected_steps'] = self.trajectory.rejected_steps
            row['rhs_evals'] = self.trajectory.rhs_evals
        return row


@dataclass
class ArtifactSet:
    """Files and results produced by one call of run()."""
    out_dir: Path
    results: List[RunResult] = field(default_factory=list)
    files: List[Path] = field(default_factory=list)

    @property
    def failed(self) -> List[RunResult]:
        return [result for result in self.results if not result.ok]

    @property
    def exit_code(self) -> int:
        if not self.failed:
            return 0
        kinds = {result.error_kind for result in self.failed}
        return 1 if kinds <= {'validation'} else 2


@dataclass
class FigureVerdict:
    """Qualitative findings checked on a figure preset."""
    preset: str
    findings: Dict[str, bool] = field(default_factory=dict)
    details: Dict[str, Any] = field(default_factory=dict)
    artifacts: Optional[ArtifactSet] = None

    @property
    def passed(self) -> bool:
        return bool(self.findings) and all(self.findings.values())

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {'preset': self.preset}
        out.update(self.findings)
        out.update(self.details)
        out['passed'] = self.passed
        return out


def plot_runs(results: List[RunResult], axis: Optional[str], out_dir: Path, stem: str) -> List[Path]:
    """Log-y SVG charts of ||x(t) - x*|| and g(x(t)) - min g, one line per run."""
    written = []
    for quantity, ylabel in (('dist_to_xstar', r'$\|x(t)-x^*\|$'),
                             ('value_gap', r'$g(x(t))-\min g$')):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for result in results:
            if not result.ok:
                continue
            traj = result.trajectory
            values = getattr(traj, quantity)
            label = f"{axis}={result.sweep_value:g}" if axis else result.label
            ax.plot(traj.times, values, label=label)
        ax.set_yscale('log', nonpositive='mask')
        ax.set_xlabel('t')
        ax.set_ylabel(ylabel)
        ax.legend()
        fig.tight_layout()
        path = Path(out_dir) / f"{stem}_{quantity}.svg"
        fig.savefig(path, format='svg', metadata={'Date': None})
        plt.close(fig)
        written.append(path)
    return written


class ExperimentRunner:
    """Runs simulations and sweeps, notifies observers and writes artifacts."""

    def __init__(self, config: Optional[FlowConfig] = None):
        """Initialize runner with configuration."""
        self.config = config or FlowConfig()
        self.config.validate()
        os.makedirs(self.config.log_dir, exist_ok=True)
        self._setup_logging()
        self.observers: List[RunObserver] = [LoggingObserver()]
        logging.info("Experiment runner initialized with configuration")

    def _setup_logging(self) -> None: # Logging system start
        """Configure logging system."""
        try:
            log_file = self.config.log_file.resolve()
            os.makedirs(log_file.parent, exist_ok=True)
            logging.basicConfig(
                filename=str(log_file),
                level=logging.INFO,
                format='%(asctime)s - %(levelname)s - %(message)s',
                force=True
            )
            logging.info(f"Logging initialized at: {log_file}")
        except Exception as e:
            print(f"Error setting up logging: {e}")
            raise

    def add_observer(self, observer: RunObserver) -> None:
        """Register new observer."""
        self.observers.append(observer)
        logging.info(f"Added observer: {observer.__class__.__name__}")

    def remove_observer(self, observer: RunObserver) -> None:
        """Remove observer."""
        self.observers.remove(observer)
        logging.info(f"Removed observer: {observer.__class__.__name__}")

    def notify_observers(self, result: RunResult) -> None:
        """Notify all observers of a finished run."""
        for observer in self.observers:
            observer.update(result)

    def integrator_config(self, experiment: ExperimentConfig) -> IntegratorConfig:
        return IntegratorConfig(
            rel_tol=experiment.rel_tol if experiment.rel_tol is not None else self.config.rel_tol,
            abs_tol=experiment.abs_tol if experiment.abs_tol is not None else self.config.abs_tol,
            max_step=experiment.max_step,
            sample_points_per_decade=self.config.sample_points_per_decade,
        )

    @staticmethod
    def build_params(experiment: ExperimentConfig) -> Params:
        return Params(
            alpha=experiment.alpha, q=experiment.q, a=experiment.a, p=experiment.p,
            t0=experiment.t0, u0=list(experiment.x0), v0=list(experiment.v0),
        )

    def classify(self, experiment: ExperimentConfig) -> RegimeReport:
        """Regime report of the configured coefficients."""
        params = self.build_params(experiment)
        validate(params)
        return classify_regime(params)

    def selftest(self, experiment: Optional[ExperimentConfig] = None) -> SelfTestReport:
        """Integrator validation against closed-form solutions."""
        return self_test(self.integrator_config(experiment or ExperimentConfig()))

    def _planned_runs(self, experiment: ExperimentConfig,
                      problem: Problem) -> List[Tuple[str, Optional[float], Params]]:
        base = self.build_params(experiment)
        if experiment.sweep is None:
            validate(base, problem)
            return [(f"{problem.identifier}", None, base)]
        axis, values = experiment.sweep
        if not values:
            raise ConfigurationError(f"Empty sweep list for {axis}")
        planned = []
        for value in values:
            params = base.with_value(axis, value)
            try:
                validate(params, problem)
            except ValidationError as e:
                raise ConfigurationError(f"Sweep value {axis}={value:g} is invalid: {e}") from e
            planned.append((f"{axis}={value:g}", value, params))
        return planned

    @staticmethod
    def _execute(label: str, value: Optional[float], problem: Problem, params: Params,
                 t_end: float, integ: IntegratorConfig) -> RunResult:
        """Integrate and diagnose one run; failures are captured, not raised."""
        result = RunResult(label=label, problem_id=problem.identifier, params=params, sweep_value=value)
        try:
            result.trajectory = integrate(problem, params, t_end, integ)
            result.summary = summarize(result.trajectory)
        except (IntegrationError, SolverError) as e:
            result.error, result.error_kind = str(e), 'integration'
        except (ValidationError, ConfigurationError) as e:
            result.error, result.error_kind = str(e), 'validation'
        return result

    def run(self, experiment: ExperimentConfig) -> ArtifactSet:
        """
        Run one simulation or a sweep and write its artifacts.

        Per run: trajectory CSV and key=value report. Per call: combined
        summary CSV and, when requested, SVG plots.

        Raises:
            ConfigurationError: for invalid configurations or sweep values
            ValidationError: for unknown problems
        """
        problem = ProblemFactory.create(experiment.problem)
        planned = self._planned_runs(experiment, problem)
        integ = self.integrator_config(experiment)
        integ.validate()
        out_dir = Path(experiment.out) if experiment.out is not None else self.config.output_dir
        collector = CsvCollectorObserver(out_dir, encoding=self.config.default_encoding)
        self.add_observer(collector)
        artifacts = ArtifactSet(out_dir=out_dir)
        try:
            with ThreadPoolExecutor(max_workers=self.config.max_workers) as pool:
                futures = [
                    pool.submit(self._execute, label, value, problem, params, experiment.t_end, integ)
                    for label, value, params in planned
                ]
                # Collected in submission order for deterministic artifacts
                for future in futures:
                    result = future.result()
                    artifacts.results.append(result)
                    self.notify_observers(result)
        finally:
            self.remove_observer(collector)

        axis = experiment.sweep[0] if experiment.sweep else None
        stem = f"sweep_{axis}" if axis else "summary"
        summary_path = collector.write_summary(stem)
        artifacts.files.extend(collector.written)
        if 'svg' in experiment.formats:
            artifacts.files.extend(plot_runs(artifacts.results, axis, out_dir, stem))
        if artifacts.failed:
            logging.warning(f"{len(artifacts.failed)} of {len(planned)} runs failed; see {summary_path}")
        return artifacts

    def figures(self, preset: str, out: Optional[Path] = None) -> FigureVerdict:
        """
        Reproduce a figure preset and check its qualitative findings at t_end.

        fig1 (q sweep): smallest iterate error for the largest q and smallest
        value error for the smallest q. fig2 (p sweep): the max/min spread of
        value errors is strictly smaller than that of iterate errors.

        Raises:
            ConfigurationError: for an unknown preset
        """
        if preset not in FIGURE_PRESETS:
            raise ConfigurationError(f"Unknown figure preset: {preset} (expected one of {', '.join(FIGURE_PRESETS)})")
        axis, values = FIGURE_PRESETS[preset]
        experiment = ExperimentConfig(
            sweep=(axis, values), formats=('csv', 'svg'), max_step=FIGURE_MAX_STEP,
            out=Path(out) if out is not None else self.config.output_dir / preset,
        )
        artifacts = self.run(experiment)
        verdict = FigureVerdict(preset=preset, artifacts=artifacts)
        # Accuracy of the solve behind the orderings
        integ = self.integrator_config(experiment)
        verdict.details.update(rel_tol=integ.rel_tol, abs_tol=integ.abs_tol, max_step=integ.max_step)
        if artifacts.failed:
            verdict.findings['all_runs_completed'] = False
            return verdict

        swept = np.array([result.sweep_value for result in artifacts.results])
        iterate_errors = np.array([result.trajectory.dist_to_xstar[-1] for result in artifacts.results])
        value_errors = np.array([result.trajectory.value_gap[-1] for result in artifacts.results])
        verdict.details['t_end'] = experiment.t_end
        verdict.details['iterate_errors'] = ",".join(f"{e:.6e}" for e in iterate_errors)
        verdict.details['value_errors'] = ",".join(f"{e:.6e}" for e in value_errors)

        if preset == 'fig1':
            iterate_winner = float(swept[int(np.argmin(iterate_errors))])
            value_winner = float(swept[int(np.argmin(value_errors))])
            verdict.details['iterate_winner'] = iterate_winner
            verdict.details['value_winner'] = value_winner
            verdict.findings['iterate_winner_is_largest_q'] = iterate_winner == float(np.max(swept))
            verdict.findings['value_winner_is_smallest_q'] = value_winner == float(np.min(swept))
        else:
            iterate_spread = float(np.max(iterate_errors) / np.min(iterate_errors))
            value_spread = float(np.max(value_errors) / np.min(value_errors))
            verdict.details['iterate_spread'] = iterate_spread
            verdict.details['value_spread'] = value_spread
            verdict.findings['value_spread_below_iterate_spread'] = value_spread < iterate_spread

        path = artifacts.out_dir / f"verdict_{preset}.txt"
        path.write_text(format_report(verdict.to_dict()), encoding=self.config.default_encoding)
        artifacts.files.append(path)
        for name, ok in verdict.findings.items():
            if ok:
                logging.info(f"{preset}: {name} holds")
            else:
                logging.error(f"{preset}: {name} does not hold ({verdict.details})")
        return verdict
