"""Kernel backend selection.

The hot loops (forward kinematics, primitive distances, configuration
and edge collision checks) exist twice: a compiled Cython core and a
pure-numpy reference with the same function surface and iteration order.
The compiled core is preferred when importable; set MANIPKIT_PURE_KERNELS=1
to force the reference implementation.
"""

import os

if os.environ.get("MANIPKIT_PURE_KERNELS", "") not in ("", "0"):
    from . import _ref as _impl

    BACKEND = "pure"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _ref as _impl

        BACKEND = "pure"

frame_compose = _impl.frame_compose
fk_frames = _impl.fk_frames
jacobian_from_frames = _impl.jacobian_from_frames
pair_distance = _impl.pair_distance
config_check = _impl.config_check
edge_check = _impl.edge_check


def backend_name() -> str:
    return BACKEND
