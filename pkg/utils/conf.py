"""
Access to the POLYVERIFY settings dict with defaults, in the way
rest_framework.settings.api_settings resolves REST_FRAMEWORK.

    from utils.conf import verifier_settings
    verifier_settings.ENCLOSURE['DIVISIONS']
"""
from django.conf import settings
from django.core.signals import setting_changed

DEFAULTS = {
    'ENCLOSURE': {
        'DIVISIONS': 2,
        'INFLATION': 1e-9,
        'ROOT_TOL': 1e-10,
        'DESCENT_ROUNDS': 50,
        'QUADRATURE_NODES': 64,
        'PADDING': 1e-9,
    },
    'SOLVER': {
        'BACKEND': 'builtin',
        'CMD': 'cbc {lp} printingOptions all solve solu {sol}',
        'TIME_LIMIT_S': 600.0,
        'MIP_GAP': 1e-6,
        'MAX_PIVOTS': 100_000,
        'WORKERS': 4,
    },
    'REACH': {
        'SYMBOLIC_WINDOW': 0,
        'PREPASS': 'concrete',
    },
}


class VerifierSettings:
    def __init__(self, user_settings=None, defaults=None):
        self._user_settings = user_settings
        self.defaults = defaults or DEFAULTS
        self._cached = set()

    @property
    def user_settings(self):
        if self._user_settings is None:
            self._user_settings = getattr(settings, 'POLYVERIFY', {})
        return self._user_settings

    def __getattr__(self, attr):
        if attr not in self.defaults:
            raise AttributeError(f"Invalid verifier setting: '{attr}'")
        section = dict(self.defaults[attr])
        section.update(self.user_settings.get(attr, {}))
        self._cached.add(attr)
        setattr(self, attr, section)
        return section

    def reload(self):
        for attr in self._cached:
            delattr(self, attr)
        self._cached.clear()
        self._user_settings = None


verifier_settings = VerifierSettings(None, DEFAULTS)


def reload_verifier_settings(*args, **kwargs):
    if kwargs['setting'] == 'POLYVERIFY':
        verifier_settings.reload()


setting_changed.connect(reload_verifier_settings)
