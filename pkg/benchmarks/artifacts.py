"""
Run artifacts: results JSON, per-step CSV and plot data. Files are written
to a temporary name in the target directory and renamed into place.
"""
import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

from utils.exceptions import ConfigurationError


def _finite_or_none(value):
    return value if value is not None and math.isfinite(value) else None


def results_document(name, mode, trajectory, verdicts, wall_time_s, simulation=None):
    """JSON-ready results of one run."""
    steps = []
    for step in trajectory.steps():
        step['gaps'] = [_finite_or_none(gap) for gap in step['gaps']]
        steps.append(step)
    document = {
        'benchmark': name,
        'mode': mode,
        'steps': steps,
        'verdicts': [verdict.to_dict() for verdict in verdicts],
        'final_volume': steps[-1]['volume'],
        'wall_time_s': wall_time_s,
    }
    if simulation is not None:
        document['simulation'] = simulation
    return document


def steps_csv(trajectory):
    """One row per step: t, mode, volume, milliseconds, then lo/hi per dimension."""
    n = trajectory.boxes[0].dimension
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['t', 'mode', 'volume', 'ms'] + [f'{side}{i}' for i in range(1, n + 1) for side in ('lo', 'hi')])
    for step in trajectory.steps():
        bounds = [repr(value) for pair in step['box'] for value in pair]
        writer.writerow([step['t'], step['mode'], repr(step['volume']), f'{step["ms"]:.3f}'] + bounds)
    return buffer.getvalue()


def emit_plot_data(trajectory, dims):
    """
    Box outlines projected on the 1-based dimensions `dims` = (i, j): one
    row per step holding t and the four corners counter-clockwise from
    (lo_i, lo_j). Comma separated with a `#` header, so gnuplot reads it
    after `set datafile separator ','`.
    """
    n = trajectory.boxes[0].dimension
    i, j = dims
    bad = [d for d in (i, j) if not 1 <= d <= n]
    if bad:
        raise ConfigurationError({'plot_dims': [f'Dimension {bad[0]} is outside 1..{n}']})
    lines = [f'# t,x{i}_1,x{j}_1,x{i}_2,x{j}_2,x{i}_3,x{j}_3,x{i}_4,x{j}_4']
    for t, box in enumerate(trajectory.boxes):
        xlo, xhi = box.lower[i - 1], box.upper[i - 1]
        ylo, yhi = box.lower[j - 1], box.upper[j - 1]
        corners = [xlo, ylo, xhi, ylo, xhi, yhi, xlo, yhi]
        lines.append(','.join([str(t)] + [repr(float(v)) for v in corners]))
    return '\n'.join(lines) + '\n'


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile('w', dir=path.parent, prefix=f'.{path.name}.', delete=False,
                                         encoding='utf-8')
    try:
        with handle:
            handle.write(text)
        os.replace(handle.name, path)
    except BaseException:
        Path(handle.name).unlink(missing_ok=True)
        raise
    return path


def write_artifacts(out_dir, stem, results, steps, plot=None):
    """Write the run's files under `out_dir`; returns {kind: path}."""
    out_dir = Path(out_dir)
    paths = {
        'results': write_atomic(out_dir / f'{stem}.json', json.dumps(results, indent=2) + '\n'),
        'steps': write_atomic(out_dir / f'{stem}-steps.csv', steps),
    }
    if plot is not None:
        paths['plot'] = write_atomic(out_dir / f'{stem}-plot.csv', plot)
    return paths
