from dataclasses import dataclass
import math
from typing import Any, List, Tuple

from app.exceptions import ConfigurationError, ValidationError
from app.flow_config import FORMATS, SWEEP_AXES

@dataclass
class InputValidator:
    """Validates and parses command line and config file values."""

    @staticmethod
    def validate_float(value: Any, name: str = 'value') -> float:
        """
        Validate and convert input to a finite float.

        Arguments:
            value: Input to validate
            name: Field name used in error messages

        Returns:
            float: Validated number

        Raises:
            ValidationError: If input is not a finite number
        """
        try:
            if isinstance(value, str):
                value = value.strip()
            number = float(value)
        except (TypeError, ValueError) as e:
            raise ValidationError(f"Invalid number format for {name}: {value}") from e
        if not math.isfinite(number):
            raise ValidationError(f"{name} must be finite, got {value}")
        return number

    @staticmethod
    def validate_positive(value: Any, name: str = 'value') -> float:
        number = InputValidator.validate_float(value, name)
        if number <= 0:
            raise ValidationError(f"{name} must be positive, got {value}")
        return number

    @staticmethod
    def validate_vector(value: Any, name: str = 'vector') -> List[float]:
        """Parse '1,1' (or a sequence) into a non-empty list of finite floats."""
        if isinstance(value, str):
            items = [item for item in value.split(',') if item.strip()]
        else:
            items = list(value)
        if not items:
            raise ValidationError(f"{name} must not be empty")
        return [InputValidator.validate_float(item, name) for item in items]

    @staticmethod
    def validate_formats(value: Any) -> Tuple[str, ...]:
        """Parse 'csv' or 'csv,svg'."""
        if isinstance(value, str):
            items = [item.strip().lower() for item in value.split(',') if item.strip()]
        else:
            items = [str(item).strip().lower() for item in value]
        if not items:
            raise ConfigurationError("At least one output format is required")
        unknown = [item for item in items if item not in FORMATS]
        if unknown:
            raise ConfigurationError(f"Unknown output format(s): {', '.join(unknown)}")
        return tuple(dict.fromkeys(items))

    @staticmethod
    def validate_sweep(value: Any) -> Tuple[str, Tuple[float, ...]]:
        """
        Parse a sweep spec 'name=v1,v2,...'.

        Raises:
            ConfigurationError: for an unknown axis or an empty value list
            ValidationError: for non-numeric values
        """
        name, sep, values = str(value).partition('=')
        name = name.strip().lower()
        if not sep or name not in SWEEP_AXES:
            raise ConfigurationError(
                f"Sweep must look like name=v1,v2 with name in {', '.join(SWEEP_AXES)}: {value}"
            )
        items = [item for item in values.split(',') if item.strip()]
        if not items:
            raise ConfigurationError(f"Empty sweep list for {name}")
        return name, tuple(InputValidator.validate_float(item, name) for item in items)
