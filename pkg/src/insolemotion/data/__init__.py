from .geometry import (
    axis_angle_matrix,
    quat_from_rotvec,
    quat_multiply,
    quat_to_matrix,
    quat_to_rotvec,
)
from .preprocess import (
    StandardizationStats,
    cumulative_root_position,
    destandardize,
    fit_stats,
    integrate_orientation,
    merge_pose,
    partition_pose,
    rotate_about_vertical,
    rotate_arrays,
    sliding_windows,
    stack_windows,
    standardize,
    to_world_acceleration,
    world_frame_sequence,
)
from .types import (
    IMU_INDEX,
    INSOLE_CHANNELS,
    SAMPLE_RATE,
    InsoleReading,
    InsoleSide,
    MotionSequence,
    MotionWindow,
    PoseFrame,
    Skeleton,
)
