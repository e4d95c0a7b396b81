"""Disk-backed collision-counting LSH with learned and sampled search radii."""

from radius_lsh.disk_index import CostCounters, DiskIndex, build_index, index_stats, read_bucket_range
from radius_lsh.lsh import (HashFamily, HashFunction, LSHParams, collision_prob, derive_params,
                            hash_level, hash_point, signature)
from radius_lsh.metrics import accuracy_ratio, qpt
from radius_lsh.schedule import RadiusSchedule, Strategy, next_radius
from radius_lsh.search import QueryReport, SearchEngine

__version__ = "0.1.0"

__all__ = [
    "CostCounters", "DiskIndex", "HashFamily", "HashFunction", "LSHParams", "QueryReport",
    "RadiusSchedule", "SearchEngine", "Strategy", "accuracy_ratio", "build_index",
    "collision_prob", "derive_params", "hash_level", "hash_point", "index_stats", "next_radius",
    "qpt", "read_bucket_range", "signature",
]
