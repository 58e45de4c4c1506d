"""
Command line interface: simulate, sweep, classify, figures and selftest.

Exit codes: 0 success, 1 configuration or validation error, 2 integration or
solver failure, 3 failed acceptance check.
"""
import argparse
from dataclasses import replace
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from app.diagnostics import format_report
from app.exceptions import (
    AcceptanceError,
    ConfigurationError,
    IntegrationError,
    SolverError,
    ValidationError,
)
from app.experiments import FIGURE_PRESETS, ArtifactSet, ExperimentRunner
from app.flow_config import ExperimentConfig

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INTEGRATION = 2
EXIT_ACCEPTANCE = 3

# argparse destinations double as config keys
_FLAG_KEYS = (
    'problem', 'alpha', 'q', 'a', 'p', 't0', 't_end', 'x0', 'v0',
    'rel_tol', 'abs_tol', 'max_step', 'out', 'format', 'sweep',
)


class _ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors as configuration errors instead of exiting with 2."""

    def error(self, message: str):
        raise ConfigurationError(f"{self.prog}: {message}")


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help='flat key=value config file; flags override it')
    parser.add_argument('--problem', help="problem id, e.g. 'quad:5,1', 'shifted:2,0', 'logsumexp:preset-1'")
    parser.add_argument('--alpha')
    parser.add_argument('--q')
    parser.add_argument('--a')
    parser.add_argument('--p')
    parser.add_argument('--t0')
    parser.add_argument('--t-end', dest='t_end')
    parser.add_argument('--x0', help='initial position, comma separated')
    parser.add_argument('--v0', help='initial velocity, comma separated')
    parser.add_argument('--rel-tol', dest='rel_tol')
    parser.add_argument('--abs-tol', dest='abs_tol')
    parser.add_argument('--max-step', dest='max_step', help='upper bound on the integrator step')
    parser.add_argument('--out', help='output directory')
    parser.add_argument('--format', help='csv or csv,svg')
    parser.add_argument('--sweep', help='name=v1,v2,... with name in q, p, a, alpha')


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog='flow', description='Inertial gradient flow with Tikhonov regularization')
    commands = parser.add_subparsers(dest='command', required=True)
    for name, help_text in (
        ('simulate', 'integrate one configuration and write its artifacts'),
        ('sweep', 'integrate a parameter sweep'),
        ('classify', 'print the regime and guaranteed rates'),
        ('selftest', 'validate the integrator on closed-form solutions'),
    ):
        _add_run_flags(commands.add_parser(name, help=help_text))
    figures = commands.add_parser('figures', help='reproduce a figure preset and check its findings')
    figures.add_argument('preset', choices=sorted(FIGURE_PRESETS) + ['all'])
    figures.add_argument('--out', help='output directory')
    return parser


def load_experiment(args: argparse.Namespace) -> ExperimentConfig:
    """Config file values first, then command line flags."""
    config_path = getattr(args, 'config', None)
    experiment = ExperimentConfig.from_file(Path(config_path)) if config_path else ExperimentConfig()
    overrides: Dict[str, Optional[str]] = {
        key: getattr(args, key, None) for key in _FLAG_KEYS
    }
    return experiment.merged(overrides)


def _print_artifacts(artifacts: ArtifactSet) -> None:
    for result in artifacts.results:
        if result.ok:
            print(f"{result.label}: ok")
            print(format_report(result.summary.to_dict()), end='')
        else:
            print(f"{result.label}: failed: {result.error}")
    print(f"Artifacts written to {artifacts.out_dir}")


def _dispatch(args: argparse.Namespace, runner: ExperimentRunner) -> int:
    if args.command == 'figures':
        presets = sorted(FIGURE_PRESETS) if args.preset == 'all' else [args.preset]
        code = EXIT_OK
        for preset in presets:
            out = Path(args.out) / preset if args.out else None
            verdict = runner.figures(preset, out=out)
            print(format_report(verdict.to_dict()), end='')
            if not verdict.passed:
                code = EXIT_ACCEPTANCE
        return code

    experiment = load_experiment(args)
    if args.command == 'classify':
        report = runner.classify(experiment)
        print(format_report(report.to_dict()), end='')
        for name, ok in report.hypotheses_checked:
            print(f"hypothesis {name}={'ok' if ok else 'violated'}")
        return EXIT_OK

    if args.command == 'selftest':
        report = runner.selftest(experiment)
        print(format_report(report.to_dict()), end='')
        if not report.passed:
            raise AcceptanceError(f"Integrator self test failed: {', '.join(report.failures)}")
        return EXIT_OK

    if args.command == 'sweep' and experiment.sweep is None:
        raise ConfigurationError("sweep needs --sweep name=v1,v2,... or a sweep key in the config file")
    if args.command == 'simulate':
        experiment = replace(experiment, sweep=None)
    artifacts = runner.run(experiment)
    _print_artifacts(artifacts)
    return artifacts.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        runner = ExperimentRunner()
        return _dispatch(args, runner)
    except (ConfigurationError, ValidationError) as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        logging.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except (IntegrationError, SolverError) as e:
        print(f"Integration failed: {e}", file=sys.stderr)
        logging.error(f"Integration failed: {e}")
        return EXIT_INTEGRATION
    except AcceptanceError as e:
        print(f"Acceptance check failed: {e}", file=sys.stderr)
        logging.error(f"Acceptance check failed: {e}")
        return EXIT_ACCEPTANCE
