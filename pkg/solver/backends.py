from utils.conf import verifier_settings
from utils.exceptions import SolverConfigurationError

from .branch_and_bound import solve_milp
from .external import solve_external

BUILTIN = 'builtin'
EXTERNAL = 'external'
BACKENDS = (BUILTIN, EXTERNAL)


def solve(model, objective, options=None):
    """
    Solve with the backend named by `options['BACKEND']`, falling back to
    the SOLVER settings for any key `options` leaves out.
    """
    options = {**verifier_settings.SOLVER, **(options or {})}
    backend = options['BACKEND']
    if backend == BUILTIN:
        return solve_milp(model, objective, time_limit=options['TIME_LIMIT_S'],
                          mip_gap=options['MIP_GAP'], max_pivots=options['MAX_PIVOTS'])
    if backend == EXTERNAL:
        return solve_external(model, objective, solver_cmd=options['CMD'], time_limit=options['TIME_LIMIT_S'])
    raise SolverConfigurationError(f'Unknown solver backend {backend!r}; expected one of {", ".join(BACKENDS)}')
