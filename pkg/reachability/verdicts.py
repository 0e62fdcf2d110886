import logging
from dataclasses import dataclass

logger = logging.getLogger(__name__)

REACH = 'reach'
AVOID = 'avoid'

VERIFIED = 'verified'
FALSIFIED_CANDIDATE = 'falsified-candidate'
UNKNOWN = 'unknown'


@dataclass
class Verdict:
    property: str
    status: str
    witness_step: int = None
    witness_box: list = None

    def to_dict(self):
        return {
            'property': self.property,
            'status': self.status,
            'witness_step': self.witness_step,
            'witness_box': self.witness_box,
        }


def check_reach_avoid(trajectory, spec):
    """
    Verdicts for the avoid property and, when the system has a goal, the
    reach property.

    The boxes over-approximate the reachable sets, so a box meeting an
    unsafe region only makes a falsified-candidate. Reach is verified at
    the first step whose box lies inside the goal, a falsified-candidate
    when no box ever meets the goal, and unknown otherwise.
    """
    verdicts = []
    avoid = Verdict(AVOID, VERIFIED)
    for t, box in enumerate(trajectory.boxes):
        if any(region.intersects(box) for region in spec.avoid_at(t)):
            avoid = Verdict(AVOID, FALSIFIED_CANDIDATE, t, box.as_pairs())
            break
    verdicts.append(avoid)

    if spec.goal is not None:
        reach = Verdict(REACH, FALSIFIED_CANDIDATE)
        for t, box in enumerate(trajectory.boxes):
            if spec.goal.contains_box(box):
                reach = Verdict(REACH, VERIFIED, t, box.as_pairs())
                break
            if spec.goal.intersects(box):
                reach = Verdict(REACH, UNKNOWN)
        verdicts.append(reach)
    for verdict in verdicts:
        logger.info('%s: %s (step %s)', verdict.property, verdict.status, verdict.witness_step)
    return verdicts
