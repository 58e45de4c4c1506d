from dataclasses import dataclass, fields, replace
import io
from pathlib import Path
import os
from typing import Any, Dict, List, Optional, Tuple
from dotenv import dotenv_values, load_dotenv # Environment variable implementation
from dotenv.parser import parse_stream

from app.exceptions import ConfigurationError

# Load .env variables
load_dotenv()

def get_project_root() -> Path:
    """Get the project root directory."""
    # Go up two levels from this file
    current_file = Path(__file__)
    return current_file.parent.parent

@dataclass
class FlowConfig:
    """Environment level settings of the experiment harness."""

    def __init__(
        self,
        base_dir: Optional[Path] = None,
        max_workers: Optional[int] = None,
        rel_tol: Optional[float] = None,
        abs_tol: Optional[float] = None,
        sample_points_per_decade: Optional[int] = None,
        default_encoding: Optional[str] = None
    ):
        """Initialize config with .env variables and/or defaults."""
        project_root = get_project_root()
        self.base_dir = Path(base_dir or os.getenv('FLOW_BASE_DIR', str(project_root))).resolve()

        # Worker threads for sweeps
        self.max_workers = max_workers if max_workers is not None else int(
            os.getenv('FLOW_MAX_WORKERS', '1')
        )

        # Integrator tolerances
        self.rel_tol = rel_tol if rel_tol is not None else float(
            os.getenv('FLOW_REL_TOL', '1e-9')
        )
        self.abs_tol = abs_tol if abs_tol is not None else float(
            os.getenv('FLOW_ABS_TOL', '1e-12')
        )

        # Log grid density
        self.sample_points_per_decade = sample_points_per_decade \
            if sample_points_per_decade is not None else int(
                os.getenv('FLOW_SAMPLES_PER_DECADE', '200')
            )

        self.default_encoding = default_encoding or os.getenv(
            'FLOW_DEFAULT_ENCODING', 'utf-8'
        )

    @property
    def log_dir(self) -> Path: # Log file output directory
        """Get log directory path."""
        return Path(os.getenv(
            'FLOW_LOG_DIR',
            str(self.base_dir / "logs")
        )).resolve()

    @property
    def log_file(self) -> Path:
        """Get log file path."""
        return Path(os.getenv(
            'FLOW_LOG_FILE',
            str(self.log_dir / "flow.log")
        )).resolve()

    @property
    def output_dir(self) -> Path: # Default artifact directory
        """Get output directory path."""
        return Path(os.getenv(
            'FLOW_OUTPUT_DIR',
            str(self.base_dir / "results")
        )).resolve()

    def validate(self) -> None:
        """Validate config settings."""
        if self.max_workers <= 0:
            raise ConfigurationError("max_workers must be positive")
        if self.rel_tol < 1e-14:
            raise ConfigurationError("rel_tol must be at least 1e-14")
        if self.abs_tol <= 0:
            raise ConfigurationError("abs_tol must be positive")
        if self.sample_points_per_decade <= 0:
            raise ConfigurationError("sample_points_per_decade must be positive")


SWEEP_AXES = ('q', 'p', 'a', 'alpha')
FORMATS = ('csv', 'svg')


@dataclass
class ExperimentConfig:
    """One run or sweep: problem, flow coefficients, horizon and outputs."""
    problem: str = 'quad:5,1'
    alpha: float = 3.5
    q: float = 0.7
    a: float = 1.0
    p: float = 1.2
    t0: float = 1.0
    t_end: float = 100.0
    x0: Tuple[float, ...] = (1.0, 1.0)
    v0: Tuple[float, ...] = (-1.0, -1.0)
    rel_tol: Optional[float] = None
    abs_tol: Optional[float] = None
    max_step: Optional[float] = None
    out: Optional[Path] = None
    formats: Tuple[str, ...] = ('csv',)
    sweep: Optional[Tuple[str, Tuple[float, ...]]] = None

    # Keys accepted in config files; 'format' maps to formats
    KEYS = ('problem', 'alpha', 'q', 'a', 'p', 't0', 't_end', 'x0', 'v0',
            'rel_tol', 'abs_tol', 'max_step', 'out', 'format', 'sweep')

    @classmethod
    def from_mapping(cls, values: Dict[str, Any]) -> 'ExperimentConfig':
        """Build a config from raw key/value strings (file or CLI)."""
        return cls().merged(values)

    @classmethod
    def from_file(cls, path: Path, encoding: str = 'utf-8') -> 'ExperimentConfig':
        """
        Read a flat key=value file in .env syntax, '#' starting a comment.

        Raises:
            ConfigurationError: on unreadable files, malformed lines or unknown keys
        """
        try:
            text = Path(path).read_text(encoding=encoding)
        except (OSError, UnicodeDecodeError) as e:
            raise ConfigurationError(f"Cannot read config file {path}: {e}") from e
        for binding in parse_stream(io.StringIO(text)):
            if binding.error or (binding.key is not None and binding.value is None):
                raise ConfigurationError(
                    f"{path}:{binding.original.line}: expected key=value, "
                    f"got '{binding.original.string.strip()}'"
                )
        values = dotenv_values(stream=io.StringIO(text), interpolate=False)
        return cls.from_mapping({key.lower().replace('-', '_'): value for key, value in values.items()})

    def merged(self, overrides: Dict[str, Any]) -> 'ExperimentConfig':
        """
        Return a copy with overrides applied; None values are ignored.

        Raises:
            ConfigurationError: for unknown keys or unparsable values
        """
        from app.input_validators import InputValidator
        updates: Dict[str, Any] = {}
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in self.KEYS:
                raise ConfigurationError(f"Unknown config key: {key}")
            try:
                if key in ('alpha', 'q', 'a', 'p', 't0', 't_end'):
                    updates[key] = InputValidator.validate_float(value, key)
                elif key in ('rel_tol', 'abs_tol', 'max_step'):
                    updates[key] = InputValidator.validate_positive(value, key)
                elif key in ('x0', 'v0'):
                    updates[key] = tuple(InputValidator.validate_vector(value, key))
                elif key == 'out':
                    updates['out'] = Path(value)
                elif key == 'format':
                    updates['formats'] = InputValidator.validate_formats(value)
                elif key == 'sweep':
                    updates['sweep'] = InputValidator.validate_sweep(value)
                else:
                    updates[key] = str(value).strip()
            except ConfigurationError:
                raise
            except Exception as e:
                raise ConfigurationError(f"Invalid value for {key}: {e}") from e
        return replace(self, **updates)

    def sweep_values(self) -> List[float]:
        return list(self.sweep[1]) if self.sweep else []

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {}
        for item in fields(self):
            value = getattr(self, item.name)
            if item.name == 'sweep' and value is not None:
                value = f"{value[0]}=" + ",".join(f"{v:g}" for v in value[1])
            elif isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, Path):
                value = str(value)
            out[item.name] = value
        return out
