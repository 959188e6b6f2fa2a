"""
Centralized Dataset Registry
Single source of truth for dataset class names, action subsets and joint topologies
"""
import json
import os
from typing import Dict, List, Optional, Tuple

# Load dataset registry from JSON
_REGISTRY_PATH = os.path.join(os.path.dirname(__file__), 'dataset_registry.json')

with open(_REGISTRY_PATH, 'r') as f:
    _REGISTRY = json.load(f)

DATASETS = _REGISTRY['datasets']
TOPOLOGIES = _REGISTRY['topologies']


def get_dataset_info(dataset_id: str) -> Dict:
    """Get full dataset information"""
    info = DATASETS.get(dataset_id)
    if not info:
        raise ValueError(f"Unknown dataset: {dataset_id}. Must be one of {sorted(DATASETS)}")
    return info


def get_topology(name: str) -> Tuple[int, int, List[Tuple[int, int]]]:
    """
    Get a joint topology preset.

    Returns:
        (joint_count, hip_index, edges) with edges as (parent, child) pairs
    """
    topo = TOPOLOGIES.get(name)
    if not topo:
        raise ValueError(f"Unknown topology: {name}. Must be one of {sorted(TOPOLOGIES)}")
    edges = [(int(p), int(c)) for p, c in topo['edges']]
    return int(topo['joint_count']), int(topo['hip_index']), edges


def get_class_name(dataset_id: str, class_label: int) -> str:
    """Human-readable class name; falls back to 'class <n>'"""
    names = DATASETS.get(dataset_id, {}).get('class_names', [])
    if 1 <= class_label <= len(names):
        return names[class_label - 1]
    return f"class {class_label}"


def get_action_subsets(dataset_id: str) -> Dict[str, List[int]]:
    """Action subsets (e.g. AS1/AS2/AS3) as 1-based class labels"""
    return {name: list(labels) for name, labels in get_dataset_info(dataset_id)['action_subsets'].items()}


def list_datasets() -> List[str]:
    return sorted(DATASETS)


def topology_for_dataset(dataset_id: str) -> Optional[str]:
    return DATASETS.get(dataset_id, {}).get('topology')
