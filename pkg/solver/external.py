"""
Escape hatch to an external MILP solver.

The command template names the LP file as {lp} and the solution file as
{sol}; {time_limit} is substituted when present. The solution file is read
in CBC's `solu` format:

    Optimal - objective value 3.00000000
          0 x                      3                       0
          1 y                      0                      -2

The first line carries the status; every following line is
`index name value [reduced cost]`, optionally prefixed by `**` when CBC
flags the value as infeasible.
"""
import logging
import re
import shlex
import shutil
import subprocess
import tempfile
from pathlib import Path

import numpy as np

from utils.conf import verifier_settings
from utils.exceptions import SolutionParseError, SolverConfigurationError, SolverError

from .branch_and_bound import INFEASIBLE_STATUS, OPTIMAL, TIME_LIMIT, MilpResult
from .lp_format import export_lp_text

logger = logging.getLogger(__name__)

_STATUS_PATTERNS = (
    (re.compile(r'^\s*optimal', re.IGNORECASE), OPTIMAL),
    (re.compile(r'infeasible', re.IGNORECASE), INFEASIBLE_STATUS),
    (re.compile(r'^\s*stopped', re.IGNORECASE), TIME_LIMIT),
)


def parse_solution(text, model):
    """(status, x) from a CBC solution file."""
    lines = text.splitlines()
    if not lines:
        raise SolutionParseError(1, '')
    header = lines[0]
    if re.search(r'unbounded', header, re.IGNORECASE):
        raise SolverError(f'External solver reports an unbounded model: {header.strip()}')
    status = next((value for pattern, value in _STATUS_PATTERNS if pattern.search(header)), None)
    if status is None:
        raise SolutionParseError(1, header)
    x = np.zeros(len(model.variables))
    for line_number, line in enumerate(lines[1:], start=2):
        stripped = line.strip()
        if not stripped:
            continue
        tokens = stripped.lstrip('*').split()
        try:
            int(tokens[0])
            name, value = tokens[1], float(tokens[2])
        except (IndexError, ValueError):
            raise SolutionParseError(line_number, line) from None
        if not model.has_variable(name):
            raise SolutionParseError(line_number, line)
        x[model.index(name)] = value
    # fixed variables can be presolved away and left out of the file
    for var in model.variables:
        if var.lb == var.ub:
            x[var.index] = var.lb
    return status, x


def solve_external(model, objective=None, solver_cmd=None, time_limit=None):
    """
    Export the model, run the solver command and read its solution back.
    A missing binary is a SolverConfigurationError; there is no fallback
    to the built-in solver.
    """
    objective = objective or model.objective
    template = solver_cmd or verifier_settings.SOLVER['CMD']
    time_limit = time_limit if time_limit is not None else verifier_settings.SOLVER['TIME_LIMIT_S']
    with tempfile.TemporaryDirectory(prefix='polyverify-') as workdir:
        lp_path = Path(workdir) / 'model.lp'
        sol_path = Path(workdir) / 'model.sol'
        lp_path.write_text(export_lp_text(model, objective))
        args = shlex.split(template.format(lp=lp_path, sol=sol_path, time_limit=time_limit))
        if not args:
            raise SolverConfigurationError('The external solver command is empty')
        if shutil.which(args[0]) is None:
            raise SolverConfigurationError(f'Solver binary {args[0]!r} not found on PATH')
        logger.debug('Running %s', ' '.join(args))
        try:
            completed = subprocess.run(args, capture_output=True, text=True, timeout=time_limit + 60.0)
        except (OSError, subprocess.SubprocessError) as exc:
            raise SolverError(f'Could not run {args[0]!r}: {exc}') from exc
        if completed.returncode != 0:
            tail = (completed.stderr or completed.stdout).strip().splitlines()[-5:]
            raise SolverError(f'{args[0]} exited with status {completed.returncode}: {" | ".join(tail)}')
        if not sol_path.exists():
            raise SolverError(f'{args[0]} wrote no solution file')
        status, x = parse_solution(sol_path.read_text(), model)

    if status == INFEASIBLE_STATUS:
        return MilpResult(INFEASIBLE_STATUS)
    value = float(model.objective_vector(objective) @ x) + objective.constant
    if status == TIME_LIMIT:
        # the solution file carries no proven bound
        return MilpResult(TIME_LIMIT, value, None, None, x)
    return MilpResult(OPTIMAL, value, value, 0.0, x)
