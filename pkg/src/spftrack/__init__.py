"""spftrack: multi-cell tracking in 4D fluorescence volumes.

Detects globular cells in the first frame (local peaks + DP-means), builds a
minimum spanning tree over the detected centroids, and tracks every cell with
a spatial particle filter that propagates each cell's proposal from its
already-filtered tree parent within the frame. Includes a synthetic-data
generator with ground truth, an evaluation harness (RMSE, failure counts,
detection metrics), and a single CLI entry point (``spftrack``).
"""

__version__ = "0.1.0"

from .volume import Volume4D, SubImage  # noqa: F401
from .detect import PeakSet, CentroidSet  # noqa: F401
from .tree import CellTree  # noqa: F401
from .track import TrackConfig, TrackResult  # noqa: F401
from .simulate import SimConfig, GroundTruth  # noqa: F401
from .evaluate import EvalReport  # noqa: F401
