"""Access to the shared dataset registry (class names, subsets, topologies)"""

import sys
from pathlib import Path

# shared/ sits next to trajectorylet-learner/ in the repo, or is copied into it for builds
for _candidate in (Path(__file__).resolve().parents[3] / "shared",
                   Path(__file__).resolve().parents[2] / "shared"):
    if _candidate.is_dir() and str(_candidate) not in sys.path:
        sys.path.insert(0, str(_candidate))
        break

from dataset_registry import (  # noqa: E402
    get_action_subsets,
    get_class_name,
    get_dataset_info,
    get_topology,
    list_datasets,
    topology_for_dataset,
)

__all__ = [
    "get_action_subsets",
    "get_class_name",
    "get_dataset_info",
    "get_topology",
    "list_datasets",
    "topology_for_dataset",
]
