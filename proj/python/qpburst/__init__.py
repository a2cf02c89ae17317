"""Fast decay detection protocol: simulation and analysis bindings."""

try:
    from ._core import *  # noqa: F401,F403
    from ._core import __version__  # noqa: F401
except ImportError:  # source tree layout: extension built out of package
    from _core import *  # noqa: F401,F403
    from _core import __version__  # noqa: F401
