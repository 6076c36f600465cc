"""Backend selection for the hot simulation/training loops.

At import time this package tries to load the compiled extension
(``coopgrad._kernels._core``, built from Cython).  When it is missing —
source checkout without a compiler, unsupported platform — every entry point
transparently falls back to the pure-Python implementations in the main
modules.  ``COOPGRAD_BACKEND=python`` forces the fallback even when the
extension is present (used by the backend-equivalence tests and the
benchmark); ``COOPGRAD_BACKEND=compiled`` raises if the extension is absent.

Both backends consume the random stream identically (one uniform per
stochastic draw, cumulative-sum inversion), so they produce the same
trajectories; see tests/test_backends.py.
"""

from __future__ import annotations

import os

try:
    from . import _core  # type: ignore[attr-defined]
    HAVE_COMPILED = True
except ImportError:
    _core = None
    HAVE_COMPILED = False


def _want_compiled(backend: str) -> bool:
    mode = os.environ.get("COOPGRAD_BACKEND", "").strip() or backend
    if mode == "python":
        return False
    if mode == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled backend requested but coopgrad._kernels._core "
                               "is not importable; build it with pip install -e .")
        return True
    if mode != "auto":
        raise ValueError(f"unknown backend {mode!r}")
    return HAVE_COMPILED


def active_backend(backend: str = "auto") -> str:
    return "compiled" if _want_compiled(backend) else "python"


def _policies_supported(policies) -> bool:
    return all(getattr(p, "kind", None) in ("reactive", "fsc") for p in policies)


def dispatch_dgd(game, policies, backend: str):
    """Kernel for dgd_train, or None to run the pure-Python loop.

    The compiled trainers cover the two-agent case (both built-in domains);
    anything else runs the generic loop.
    """
    if (not _want_compiled(backend) or not _policies_supported(policies)
            or len(game.agents) != 2):
        return None
    from ..games import GameModel
    from ..domains.soccer import SoccerGame

    if isinstance(game, GameModel):
        return _core.dgd_train_tabular
    if isinstance(game, SoccerGame) and _core.soccer_supported(game):
        return _core.dgd_train_soccer
    return None


def dispatch_soccer_eval(game, policies, backend: str):
    if not _want_compiled(backend) or not _policies_supported(policies):
        return None
    from ..domains.soccer import SoccerGame

    if isinstance(game, SoccerGame) and _core.soccer_supported(game):
        return _core.evaluate_soccer
    return None


def dispatch_soccer_q(game, backend: str):
    if not _want_compiled(backend):
        return None
    from ..domains.soccer import SoccerGame

    if isinstance(game, SoccerGame) and _core.soccer_supported(game):
        return _core.q_train_soccer
    return None


def dispatch_soccer_rollout(game, policies, backend: str):
    if not _want_compiled(backend) or not _policies_supported(policies):
        return None
    from ..domains.soccer import SoccerGame

    if isinstance(game, SoccerGame) and _core.soccer_supported(game):
        return _core.rollout_soccer
    return None
