//! Dataset readers and writers.

mod kitti;
mod ply;
mod trajectory;

pub use kitti::{
    correct_elevation, correct_intrinsic_angle, list_kitti_scans, read_kitti_bin, read_kitti_poses, write_kitti_bin,
    write_kitti_poses,
};
pub use ply::{read_ply, write_ply, PlyData, PlyFormat};
pub use trajectory::{read_trajectory_csv, write_trajectory_csv, StageTimings, Trajectory, TrajectoryRecord};
