from ._core import (
    BimregError,
    Config,
    FloorIndex,
    Pose,
    Registration,
    WallModel,
    build_floor_index,
    confidence_at,
    generate_floorplan,
    load_building,
    load_floor_index,
    load_pose,
    load_submap,
    reliability_curve,
    register,
    save_building,
    save_pose,
    save_submap,
    solve_se2,
    synthesize_submap,
)

__all__ = [
    "BimregError",
    "Config",
    "FloorIndex",
    "Pose",
    "Registration",
    "WallModel",
    "build_floor_index",
    "confidence_at",
    "generate_floorplan",
    "load_building",
    "load_floor_index",
    "load_pose",
    "load_submap",
    "reliability_curve",
    "register",
    "save_building",
    "save_pose",
    "save_submap",
    "solve_se2",
    "synthesize_submap",
]
