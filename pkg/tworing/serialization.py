"""
JSON and CSV emission for matrices, reports and solution grids.

Complex numbers are written as {"re": x, "im": y} and matrices row-major.
Every JSON document carries the schema version SCHEMA.
"""
import json
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd
import sympy

from tworing.errors import InvalidParamsError

SCHEMA = 'tworing.report/1'


def _clean(value: float) -> float:
    # -0.0 would make otherwise identical reports differ
    return 0.0 if value == 0 else float(value)


def complex_to_json(value) -> Dict[str, float]:
    """{"re": ..., "im": ...} for any numeric or sympy scalar."""
    if isinstance(value, sympy.Basic):
        value = complex(sympy.N(value))
    z = complex(value)
    return {'re': _clean(z.real), 'im': _clean(z.imag)}


def complex_from_json(value) -> complex:
    """Accept {"re", "im"} objects, [re, im] pairs or plain numbers."""
    if isinstance(value, dict):
        try:
            return complex(float(value['re']), float(value.get('im', 0.0)))
        except (KeyError, TypeError, ValueError):
            raise InvalidParamsError(f'Malformed complex number: {value!r}')
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    raise InvalidParamsError(f'Malformed complex number: {value!r}')


def matrix_to_json(matrix) -> list:
    """Row-major nested list of complex objects."""
    arr = np.asarray(matrix)
    return [[complex_to_json(v) for v in row] for row in arr]


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy, sympy and complex values for json.dumps."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if obj.ndim == 0:
            return to_jsonable(obj.item())
        if obj.dtype == bool:
            return obj.tolist()
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _clean(float(obj)) if np.isfinite(obj) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return complex_to_json(obj)
    if isinstance(obj, sympy.Basic):
        if obj.is_real:
            return _clean(float(obj))
        return complex_to_json(obj)
    return obj


def report(kind: str, payload: Dict[str, Any]) -> Dict[str, Any]:
    """Wrap a payload with the schema version and kind."""
    doc = {'schema': SCHEMA, 'kind': kind}
    doc.update(payload)
    return to_jsonable(doc)


def dumps(doc: Dict[str, Any]) -> str:
    return json.dumps(doc, indent=2, sort_keys=False)


def matrix_frame(matrix) -> pd.DataFrame:
    """Long-format table with columns row, col, re, im."""
    arr = np.asarray(matrix)
    rows, cols = np.indices(arr.shape)
    values = np.array([complex(sympy.N(v)) if isinstance(v, sympy.Basic) else complex(v) for v in arr.ravel()])
    return pd.DataFrame(
        {
            'row': rows.ravel(),
            'col': cols.ravel(),
            're': [_clean(v) for v in values.real],
            'im': [_clean(v) for v in values.imag],
        }
    )


def solution_frame(blocks: np.ndarray, r: np.ndarray, residual: Optional[np.ndarray] = None) -> pd.DataFrame:
    """
    One row per (r, j) with the real and imaginary parts of the four block
    entries and, optionally, the per-block residual.
    """
    n, points = blocks.shape[:2]
    records = {'r': np.tile(r, n), 'j': np.repeat(np.arange(n), points)}
    for a in range(2):
        for b in range(2):
            values = blocks[:, :, a, b].ravel()
            records[f'g{a}{b}_re'] = values.real
            records[f'g{a}{b}_im'] = values.imag
    if residual is not None:
        records['residual'] = np.asarray(residual).ravel()
    return pd.DataFrame(records)


def pretty_matrix(matrix, precision: int = 6) -> str:
    """Aligned human-readable rendering of a complex or exact matrix."""
    arr = np.asarray(matrix)
    if arr.dtype == object:
        cells = [[str(v) for v in row] for row in arr]
    else:
        cells = [[_format_complex(complex(v), precision) for v in row] for row in arr]
    width = max((len(c) for row in cells for c in row), default=1)
    return '\n'.join('  '.join(c.rjust(width) for c in row) for row in cells)


def _format_complex(z: complex, precision: int) -> str:
    re, im = _clean(round(z.real, precision)), _clean(round(z.imag, precision))
    if im == 0:
        return f'{re:g}'
    return f'{re:g}{im:+g}i'


def write_text(text: str, output: Optional[str]) -> None:
    """Write to a file, or to stdout when output is None."""
    if output is None:
        print(text)
        return
    Path(output).write_text(text + ('' if text.endswith('\n') else '\n'), encoding='utf-8')


def frame_to_text(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False)


def load_boundary_json(path: str) -> Dict[str, np.ndarray]:
    """
    Read boundary (and optional initial) data.

    Expected layout::

        {"left":  [block_0, ..., block_{n-1}],
         "right": [block_0, ..., block_{n-1}],
         "initial": [[block_j(r_0), ...], ...]}     (optional)

    where each block is a 2x2 nested list of complex values.

    Raises:
        InvalidParamsError: If the file is missing, malformed or has
                            inconsistent shapes
    """
    file_path = Path(path)
    if not file_path.exists():
        raise InvalidParamsError(f'Boundary file not found: {path}')
    try:
        data = json.loads(file_path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise InvalidParamsError(f'Boundary JSON parsing error at line {e.lineno}, column {e.colno}: {e.msg}')
    if not isinstance(data, dict) or 'left' not in data or 'right' not in data:
        raise InvalidParamsError("Boundary JSON must be an object with 'left' and 'right' entries")

    def to_array(value, ndim):
        arr = np.vectorize(complex_from_json, otypes=[complex])(np.array(value, dtype=object))
        if arr.ndim != ndim or arr.shape[-2:] != (2, 2):
            raise InvalidParamsError(f'Expected an array of 2x2 blocks with {ndim} axes, got shape {arr.shape}')
        return arr

    out = {'left': to_array(data['left'], 3), 'right': to_array(data['right'], 3)}
    if out['left'].shape != out['right'].shape:
        raise InvalidParamsError('Left and right boundary data have different shapes')
    if 'initial' in data:
        out['initial'] = to_array(data['initial'], 4)
    return out
