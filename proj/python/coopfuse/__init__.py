"""Keypoints-based cooperative vehicle detection: geometry, proposal fusion,
localization correction, CPM codec, simulator and evaluation."""

from coopfuse._coopfuse import *  # noqa: F401,F403
from coopfuse._coopfuse import __version__  # noqa: F401
