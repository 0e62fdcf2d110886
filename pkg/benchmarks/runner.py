"""
End-to-end verification of one benchmark config: load, compute the
trajectory, judge the properties, write artifacts and optionally record
the run.
"""
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from decouple import config as env
from django.utils.text import slugify

from reachability.reach import CONCRETE, SYMBOLIC, ReachOptions, compute_trajectory, make_schedule
from reachability.simulation import simulate
from reachability.verdicts import FALSIFIED_CANDIDATE, VERIFIED, check_reach_avoid
from utils.conf import verifier_settings
from utils.exceptions import ConfigurationError, VerifierError

from .artifacts import emit_plot_data, results_document, steps_csv, write_artifacts
from .loaders import load_benchmark_config
from .models import VerificationRun

logger = logging.getLogger(__name__)

EXIT_VERIFIED = 0
EXIT_FALSIFIED = 1
EXIT_UNKNOWN = 2

SOLVER_KEYS = {
    'backend': 'BACKEND',
    'cmd': 'CMD',
    'time_limit_s': 'TIME_LIMIT_S',
    'mip_gap': 'MIP_GAP',
    'max_pivots': 'MAX_PIVOTS',
}

SIMULATION_TOL = 1e-9


@dataclass
class RunFlags:
    """Command-line overrides; None keeps the config's value."""
    symbolic_window: int = None
    divisions: int = None
    solver: str = None
    time_limit: float = None
    out_dir: Path = Path('results')
    plot_dims: tuple = None
    record: bool = False
    constants: dict = None
    simulations: int = 0
    seed: int = 0


@dataclass
class RunReport:
    exit_code: int
    summary: str
    verdicts: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    trajectory: object = None
    error: str = ''
    run: VerificationRun = None


def exit_code_for(verdicts):
    statuses = [verdict.status for verdict in verdicts]
    if FALSIFIED_CANDIDATE in statuses:
        return EXIT_FALSIFIED
    if all(status == VERIFIED for status in statuses):
        return EXIT_VERIFIED
    return EXIT_UNKNOWN


def reach_settings(config, flags):
    """Schedule width and ReachOptions: flags over config over settings."""
    solver = {SOLVER_KEYS[key]: value for key, value in config.solver.items() if key in SOLVER_KEYS}
    override = env('POLYVERIFY_SOLVER_CMD', default='')
    if override:
        solver['CMD'] = override
    if flags.solver is not None:
        solver['BACKEND'] = flags.solver
    if flags.time_limit is not None:
        solver['TIME_LIMIT_S'] = flags.time_limit
    window = flags.symbolic_window
    if window is None:
        window = config.schedule.get('symbolic_window', verifier_settings.REACH['SYMBOLIC_WINDOW'])
    options = ReachOptions(
        divisions=flags.divisions or config.enclosure.get('divisions'),
        solver=solver,
        workers=config.solver.get('workers'),
        prepass=config.schedule.get('prepass'),
    )
    return window, options


def mode_name(window):
    return CONCRETE if window <= 1 else f'{SYMBOLIC}({window})'


def simulation_summary(spec, trajectory, count, seed):
    """
    Exact rollouts checked against the boxes; any rollout state in an
    active unsafe region is a concrete counterexample.
    """
    states = simulate(spec, count, np.random.default_rng(seed))
    outside, unsafe = 0, 0
    for t, box in enumerate(trajectory.boxes):
        outside += int(np.count_nonzero(~box.contains_points(states[:, t], SIMULATION_TOL)))
        for region in spec.avoid_at(t):
            unsafe += int(np.count_nonzero(region.contains_points(states[:, t])))
    if outside:
        logger.error('%d simulated states fall outside the computed boxes', outside)
    return {'count': count, 'seed': seed, 'states_outside_boxes': outside, 'unsafe_states': unsafe}


def summary_line(name, mode, verdicts, volume, wall_time_s):
    judged = ', '.join(f'{verdict.property}={verdict.status}' for verdict in verdicts)
    return f'{name} [{mode}]: {judged}; final volume {volume:.4g}; {wall_time_s:.1f} s'


def _failed_run(name, mode, started, error, flags):
    wall_time_s = time.monotonic() - started
    logger.error('Verification of %s failed: %s', name, error)
    report = RunReport(EXIT_UNKNOWN, f'{name} [{mode}]: error: {error}', error=str(error))
    if flags.record:
        report.run = VerificationRun.objects.create(benchmark=name, mode=mode, exit_code=EXIT_UNKNOWN,
                                                    wall_time_s=wall_time_s, error=str(error))
    return report


def run_verification(config_path, flags=None):
    """
    Verify one config. Exit code 0 when every verdict is verified, 1 on
    any falsified-candidate, 2 on unknown or any error, including a result
    directory that cannot be written.
    """
    flags = flags or RunFlags()
    started = time.monotonic()
    name = Path(config_path).stem
    mode = CONCRETE
    try:
        config = load_benchmark_config(config_path, flags.constants)
        name = config.name
        spec = config.system
        if flags.plot_dims is not None:
            bad = [d for d in flags.plot_dims if not 1 <= d <= spec.n]
            if bad:
                raise ConfigurationError({'plot_dims': [f'Dimension {bad[0]} is outside 1..{spec.n}']})
        window, options = reach_settings(config, flags)
        mode = mode_name(window)
        logger.info('Verifying %s: T=%d, %s, k=%d, solver %s', name, spec.horizon, mode, options.divisions,
                    options.solver.get('BACKEND', verifier_settings.SOLVER['BACKEND']))
        trajectory = compute_trajectory(spec, make_schedule(spec.horizon, window), options)
        verdicts = check_reach_avoid(trajectory, spec)
        simulation = None
        if flags.simulations:
            simulation = simulation_summary(spec, trajectory, flags.simulations, flags.seed)
        plot = emit_plot_data(trajectory, flags.plot_dims) if flags.plot_dims is not None else None

        wall_time_s = time.monotonic() - started
        results = results_document(name, mode, trajectory, verdicts, wall_time_s, simulation)
        artifacts = write_artifacts(flags.out_dir, slugify(name) or 'run', results, steps_csv(trajectory), plot)
    except OSError as exc:
        return _failed_run(name, mode, started, f'I/O error: {exc}', flags)
    except (VerifierError, ValueError) as exc:
        return _failed_run(name, mode, started, exc, flags)

    exit_code = exit_code_for(verdicts)
    volume = results['final_volume']
    report = RunReport(exit_code, summary_line(name, mode, verdicts, volume, wall_time_s), verdicts,
                       artifacts, trajectory)
    if flags.record:
        report.run = VerificationRun.objects.create(
            benchmark=name,
            mode=mode,
            exit_code=exit_code,
            verdicts=results['verdicts'],
            final_box=trajectory.final.as_pairs(),
            final_volume=volume,
            wall_time_s=wall_time_s,
            results_path=str(artifacts['results']),
        )
    logger.info(report.summary)
    return report
