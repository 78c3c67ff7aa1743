"""Check rows and JSON/CSV report writers"""
from __future__ import annotations

import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from starfactor.errors import VerificationError

CHECK_COLUMNS = ['name', 'value', 'reference', 'residual', 'tolerance', 'passed', 'note']


@dataclass
class Check:
    name: str
    value: object
    reference: object
    residual: float
    tolerance: float
    passed: bool
    note: str = ''

    @classmethod
    def relative(cls, name, value, reference, tolerance, note=''):
        scale = max(abs(float(reference)), 1e-300)
        residual = abs(float(value) - float(reference)) / scale
        return cls(name, value, reference, residual, tolerance, bool(residual < tolerance), note)

    @classmethod
    def absolute(cls, name, value, reference, tolerance, note=''):
        residual = abs(float(value) - float(reference))
        return cls(name, value, reference, residual, tolerance, bool(residual < tolerance), note)

    @classmethod
    def exact(cls, name, value, reference, note=''):
        residual = float(abs(Fraction(value) - Fraction(reference)))
        return cls(name, value, reference, residual, 0.0, Fraction(value) == Fraction(reference), note)

    @classmethod
    def below(cls, name, value, bound, margin=0.0, note=''):
        """value must stay under bound - margin"""
        residual = float(value) - float(bound)
        return cls(name, value, bound, residual, margin, bool(residual < -margin), note)

    @classmethod
    def flag(cls, name, passed, note=''):
        return cls(name, bool(passed), True, 0.0 if passed else 1.0, 0.0, bool(passed), note)

    def advisory(self, note):
        """Copy that always passes, for exploratory checks that report without asserting"""
        return dataclasses.replace(self, passed=True, note=f"{self.note}; {note}" if self.note else note)


def all_passed(checks) -> bool:
    return all(check.passed for check in checks)


def failed(checks) -> list:
    return [check for check in checks if not check.passed]


def require(checks, context: str):
    """Raise VerificationError listing every failed check"""
    failures = failed(checks)
    if failures:
        names = ', '.join(check.name for check in failures)
        raise VerificationError(f"{context}: {len(failures)} check(s) failed: {names}", failures)
    return checks


def checks_frame(checks) -> pd.DataFrame:
    rows = [{column: _plain(getattr(check, column)) for column in CHECK_COLUMNS} for check in checks]
    return pd.DataFrame(rows, columns=CHECK_COLUMNS)


def _plain(value):
    """Scalar suitable for a CSV cell"""
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}" if value.denominator != 1 else str(value.numerator)
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, complex):
        return str(value)
    return value


def to_jsonable(value):
    if isinstance(value, Fraction):
        return {'fraction': f"{value.numerator}/{value.denominator}", 'value': float(value)}
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, np.ndarray):
        return [to_jsonable(item) for item in value.tolist()]
    if isinstance(value, pd.DataFrame):
        return [to_jsonable(row) for row in value.to_dict(orient='records')]
    if isinstance(value, Path):
        return str(value)
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        if hasattr(value, 'to_dict'):
            return to_jsonable(value.to_dict())
        return {field.name: to_jsonable(getattr(value, field.name)) for field in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    raise TypeError(f"cannot serialize {type(value).__name__}")


def run_info(started: float) -> dict:
    """The only fields allowed to differ between identical invocations"""
    return {
        'timestamp': datetime.now(timezone.utc).isoformat(timespec='seconds'),
        'wall_clock_seconds': round(time.perf_counter() - started, 6),
    }


def write_report(payload: dict, frame: pd.DataFrame, out: Optional[str] = None, fmt: str = 'json'):
    """Write the full payload as JSON or the flat table as CSV, to a file or stdout"""
    if fmt == 'json':
        text = json.dumps(to_jsonable(payload), indent=2) + '\n'
    elif fmt == 'csv':
        text = frame.map(_plain).to_csv(index=False)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if out is None or out == '-':
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return text
