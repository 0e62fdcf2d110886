import math
import re

from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _

from expressions.parser import parse
from utils.exceptions import ExpressionSyntaxError

CONSTANT_NAME = re.compile(r'\b(c\d+)\b')


def validate_finite(value):
    """
    Validate a real number is finite
    """
    if not math.isfinite(value):
        raise ValidationError(_('Value must be a finite number'))


def validate_positive(value):
    """
    Validate a real number is strictly positive
    """
    validate_finite(value)
    if value <= 0:
        raise ValidationError(_('Value must be positive'))


def validate_interval_pair(value):
    """
    Validate a [lo, hi] pair with lo <= hi
    """
    if len(value) != 2:
        raise ValidationError(_('An interval is a [lo, hi] pair'))
    lo, hi = value
    validate_finite(lo)
    validate_finite(hi)
    if lo > hi:
        raise ValidationError(_('Interval lower bound %(lo)s exceeds upper bound %(hi)s'),
                              params={'lo': lo, 'hi': hi})


def validate_expression_source(value):
    """
    Validate a transition function parses; named constants (c1, c2, ...)
    are bound later and only need to be well-formed here
    """
    placeholders = {name: 0.0 for name in CONSTANT_NAME.findall(value)}
    try:
        parse(value, placeholders)
    except ExpressionSyntaxError as exc:
        raise ValidationError(_('Invalid expression: %(error)s'), params={'error': str(exc)})
