"""Python front end for the reifsplit library."""

import json

from ._reifsplit import *  # noqa: F401,F403
from ._reifsplit import certify_biholder as _certify_biholder


def certify_biholder(index, pairs=500, seed=1, alpha=0.1):
    """Run the biHolder certification and return the report as a dict."""
    return json.loads(_certify_biholder(index, pairs, seed, alpha))
