"""Rigid-column displacement-to-pose solver bindings."""

from ._shmpose import (
    ColumnGeometry,
    ColumnPose,
    ColumnSolution,
    DomainError,
    Point3,
    SingularityError,
    center_pose,
    forward_column,
    safe_asin,
    solve_chain,
    solve_column,
)

__all__ = [
    "ColumnGeometry",
    "ColumnPose",
    "ColumnSolution",
    "DomainError",
    "Point3",
    "SingularityError",
    "center_pose",
    "forward_column",
    "safe_asin",
    "solve_chain",
    "solve_column",
]
