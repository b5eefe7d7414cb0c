"""Image watermark embedding, verification and tracing."""
from ._core import *  # noqa: F401,F403
from ._core import WmtraceError, Scheme  # noqa: F401

__version__ = "0.3.0"
