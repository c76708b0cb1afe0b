"""Entropy-ordered absorbing diffusion text generation over a small masked LM."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401


def words(samples):
    """Whitespace-split strings into integer token lists for the diversity metrics."""
    ids = {}
    return [[ids.setdefault(w, len(ids)) for w in s.split()] for s in samples]
