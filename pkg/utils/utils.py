import json
import logging
import os

import numpy as np


def load_json(filename):
    with open(filename, 'r') as file:
        return json.load(file)


def dump_json(obj, filename=None, pretty=False) -> str:
    """Serialize obj deterministically; write it to filename when given."""
    text = json.dumps(obj, indent=2 if pretty else None, sort_keys=True)
    if filename is not None:
        os.makedirs(os.path.dirname(os.path.abspath(filename)), exist_ok=True)
        with open(filename, 'w') as file:
            file.write(text + '\n')
        logging.info(f"Wrote {filename}")
    return text


def matrix_to_json(arr: np.ndarray) -> list:
    """Complex array -> nested lists ending in [re, im] pairs."""
    arr = np.asarray(arr, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def matrix_from_json(data) -> np.ndarray:
    pairs = np.asarray(data, dtype=float)
    if pairs.ndim == 0 or pairs.shape[-1] != 2:
        raise ValueError(f"Expected [re, im] pairs, got an array of shape {pairs.shape}")
    return pairs[..., 0] + 1j * pairs[..., 1]


def format_table(rows: list[dict], columns: list[str] | None = None) -> str:
    """Plain-text table for --pretty output."""
    if not rows:
        return ''
    columns = columns or list(rows[0])
    cells = [[str(row.get(c, '')) for c in columns] for row in rows]
    widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(columns)]
    lines = ['  '.join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append('  '.join('-' * w for w in widths))
    lines += ['  '.join(v.ljust(w) for v, w in zip(r, widths)) for r in cells]
    return '\n'.join(lines)
