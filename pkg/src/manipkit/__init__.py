"""manipkit: language-driven manipulation planning toolkit."""

__version__ = "0.1.0"

from .geometry import Aabb, Pose

__all__ = ["Aabb", "Pose", "__version__"]
