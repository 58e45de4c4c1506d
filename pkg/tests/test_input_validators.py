"""
Unit tests for the InputValidator class.
"""

import pytest

from app.exceptions import ConfigurationError, ValidationError
from app.input_validators import InputValidator


def test_validate_float_with_valid_int():
    """Test validate_float with a valid integer."""
    assert InputValidator.validate_float(3, 'alpha') == 3.0


def test_validate_float_with_valid_str():
    """Test validate_float with a padded string number."""
    assert InputValidator.validate_float(' 1e-9 ', 'rel_tol') == 1e-9


def test_validate_float_with_invalid_str():
    """Test validate_float with a non-numeric string."""
    with pytest.raises(ValidationError, match="Invalid number format for q: abc"):
        InputValidator.validate_float('abc', 'q')


def test_validate_float_with_none():
    """Test validate_float with None."""
    with pytest.raises(ValidationError, match="Invalid number format"):
        InputValidator.validate_float(None)


@pytest.mark.parametrize("value", ['nan', 'inf', float('-inf')])
def test_validate_float_rejects_non_finite(value):
    """Test that nan and infinities are refused."""
    with pytest.raises(ValidationError, match="must be finite"):
        InputValidator.validate_float(value, 'p')


def test_validate_positive():
    """Test validate_positive on both sides of zero."""
    assert InputValidator.validate_positive('0.5', 'max_step') == 0.5
    with pytest.raises(ValidationError, match="max_step must be positive"):
        InputValidator.validate_positive('0', 'max_step')


def test_validate_vector_from_string():
    """Test parsing a comma separated vector."""
    assert InputValidator.validate_vector('1, -1', 'x0') == [1.0, -1.0]


def test_validate_vector_from_sequence():
    """Test parsing a sequence of numbers."""
    assert InputValidator.validate_vector((2, '3.5'), 'v0') == [2.0, 3.5]


def test_validate_vector_rejects_empty():
    """Test that an empty vector is refused."""
    with pytest.raises(ValidationError, match="x0 must not be empty"):
        InputValidator.validate_vector(' , ', 'x0')


def test_validate_vector_rejects_bad_entry():
    """Test that a non-numeric entry is refused."""
    with pytest.raises(ValidationError, match="Invalid number format for v0"):
        InputValidator.validate_vector('1,x', 'v0')


def test_validate_formats():
    """Test format lists are lowercased and de-duplicated in order."""
    assert InputValidator.validate_formats('SVG, csv,svg') == ('svg', 'csv')
    assert InputValidator.validate_formats(['csv']) == ('csv',)


def test_validate_formats_unknown():
    """Test that unknown formats raise ConfigurationError."""
    with pytest.raises(ConfigurationError, match="Unknown output format\\(s\\): png"):
        InputValidator.validate_formats('csv,png')


def test_validate_formats_empty():
    """Test that an empty format list raises ConfigurationError."""
    with pytest.raises(ConfigurationError, match="At least one output format"):
        InputValidator.validate_formats('')


def test_validate_sweep():
    """Test parsing name=v1,v2,..."""
    assert InputValidator.validate_sweep('Q=0.3, 0.5,0.99') == ('q', (0.3, 0.5, 0.99))


@pytest.mark.parametrize("value", ['q', 'gamma=1,2', '=1,2'])
def test_validate_sweep_bad_axis(value):
    """Test that a missing '=' or an unknown axis raises ConfigurationError."""
    with pytest.raises(ConfigurationError, match="Sweep must look like"):
        InputValidator.validate_sweep(value)


def test_validate_sweep_empty_list():
    """Test that a sweep without values raises ConfigurationError."""
    with pytest.raises(ConfigurationError, match="Empty sweep list for p"):
        InputValidator.validate_sweep('p=')


def test_validate_sweep_bad_value():
    """Test that a non-numeric sweep value raises ValidationError."""
    with pytest.raises(ValidationError, match="Invalid number format for a"):
        InputValidator.validate_sweep('a=1,two')
