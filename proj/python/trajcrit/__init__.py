"""Trajectory criticality analytics for highD-format recordings."""

import json as _json

from . import _trajcrit
from ._trajcrit import (  # noqa: F401
    ConfigError,
    DataError,
    Error,
    GenerationError,
    SpecError,
    __version__,
    ettc,
    rp,
    scenario_kinds,
    thw,
    ttc,
    verify,
)


def histogram(values, edges, saturate=False):
    return _json.loads(_trajcrit.histogram_json(list(values), list(edges), saturate))


def fit(values, family):
    """Maximum likelihood fit, family 'logistic' or 'gev'."""
    return _json.loads(_trajcrit.fit_json(list(values), family))


def triangular_fit(points, target=0.97):
    return _json.loads(_trajcrit.triangular_fit_json([tuple(p) for p in points], target))


def synth(kind, out, params=None, seed=1, recording_id=1):
    return _trajcrit.synth(kind, str(out), _json.dumps(params or {}), seed, recording_id)


def run(data=None, script=None, out=None, **options):
    """Run the analyses; writes the bundle when ``out`` is given."""
    config = dict(options)
    if data is not None:
        config["data"] = str(data)
    if script is not None:
        config["script"] = str(script)
    if out is not None:
        config["out"] = str(out)
    if "analyses" in config:
        config["analyses"] = list(config["analyses"])
    return _json.loads(_trajcrit.run(_json.dumps(config), out is not None))
