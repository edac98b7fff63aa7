use std::f64::consts::PI;

use super::scene::*;

fn wall(from: [f64; 2], to: [f64; 2], z_max: f64, intensity: f32) -> WallSpec {
    WallSpec {
        from,
        to,
        z_min: 0.0,
        z_max,
        intensity,
    }
}

fn block(center: [f64; 2], size: [f64; 3], yaw_deg: f64, intensity: f32) -> BoxSpec {
    BoxSpec {
        center: [center[0], center[1], 0.0],
        size,
        yaw_deg,
        velocity: [0.0; 3],
        intensity,
    }
}

fn line_pole(position: [f64; 2], z_max: f64) -> PoleSpec {
    PoleSpec {
        position,
        z_min: 0.0,
        z_max,
        radius: 0.0,
        intensity: 120.0,
    }
}

fn beam(from: [f64; 3], to: [f64; 3]) -> BeamSpec {
    BeamSpec {
        from,
        to,
        intensity: 150.0,
    }
}

impl SceneSpec {
    pub const PRESETS: [&'static str; 3] = ["structured", "corridor", "loop"];

    pub fn preset(name: &str) -> Option<SceneSpec> {
        Some(match name {
            "structured" => structured(),
            "corridor" => corridor(),
            "loop" => square_loop(),
            _ => return None,
        })
    }
}

/// Static sensor among three facades, four pillars and two beams.
fn structured() -> SceneSpec {
    SceneSpec {
        frames: 1,
        trajectory: TrajectorySpec::Static {
            position: [0.0, 0.0],
            heading_deg: 0.0,
        },
        walls: vec![
            wall([15.0, -15.0], [15.0, 15.0], 8.0, 60.0),
            wall([-12.0, 12.0], [12.0, 12.0], 10.0, 80.0),
            wall([-15.0, -5.0], [-5.0, -15.0], 7.0, 70.0),
        ],
        poles: vec![
            line_pole([5.0, 5.0], 5.0),
            line_pole([-6.0, 4.0], 6.0),
            line_pole([4.0, -7.0], 5.0),
            line_pole([-8.0, 1.0], 4.0),
        ],
        beams: vec![beam([-5.0, 8.0, 4.5], [5.0, 8.0, 4.5]), beam([9.0, -5.0, 3.5], [9.0, 5.0, 3.5])],
        ..Default::default()
    }
}

/// Straight drive between broken building rows with cross structure.
fn corridor() -> SceneSpec {
    let mut walls = Vec::new();
    let mut boxes = Vec::new();
    let mut poles = Vec::new();
    for k in 0..8 {
        let x = -20.0 + k as f64 * 18.0;
        walls.push(wall([x, 9.0], [x + 14.0, 9.0], 6.0 + (k % 3) as f64 * 2.0, 60.0));
        walls.push(wall([x + 6.0, -9.0], [x + 20.0, -9.0], 7.0 + (k % 2) as f64 * 3.0, 70.0));
        // Returns facing along the drive direction.
        walls.push(wall([x + 14.0, 9.0], [x + 14.0, 13.0], 6.0, 65.0));
        walls.push(wall([x + 6.0, -9.0], [x + 6.0, -13.0], 7.0, 75.0));
        boxes.push(block([x + 9.0, 6.5], [2.5, 1.5, 1.2 + (k % 2) as f64], 0.0, 30.0));
        poles.push(line_pole([x + 3.0, -5.5], 5.0));
        poles.push(line_pole([x + 12.0, 5.5], 6.0));
    }
    SceneSpec {
        frames: 40,
        trajectory: TrajectorySpec::Line {
            step: 0.5,
            start: [0.0, 0.0],
            heading_deg: 0.0,
        },
        walls,
        boxes,
        poles,
        beams: vec![beam([10.0, -5.5, 5.0], [10.0, 5.5, 5.0]), beam([46.0, -5.5, 4.5], [46.0, 5.5, 4.5])],
        ..Default::default()
    }
}

/// 100 m rounded-square loop around a central block; 200 frames at
/// 0.5 m end half a step before the start.
fn square_loop() -> SceneSpec {
    let r = 4.0;
    let side = (100.0 + 8.0 * r - 2.0 * PI * r) / 4.0;
    let h = side / 2.0;
    let mut boxes = vec![block([0.0, 0.0], [10.0, 10.0, 8.0], 0.0, 50.0)];
    let outer = [
        ([-8.0, -h - 9.0], [8.0, 5.0, 7.0], 0.0),
        ([4.0, -h - 8.0], [6.0, 4.0, 10.0], 12.0),
        ([14.0, -h - 10.0], [5.0, 6.0, 6.0], 0.0),
        ([h + 9.0, -10.0], [5.0, 8.0, 8.0], 0.0),
        ([h + 8.0, 3.0], [4.0, 6.0, 12.0], -8.0),
        ([h + 10.0, 14.0], [6.0, 5.0, 7.0], 0.0),
        ([10.0, h + 9.0], [7.0, 5.0, 9.0], 0.0),
        ([-2.0, h + 8.0], [6.0, 4.0, 6.0], 20.0),
        ([-14.0, h + 10.0], [5.0, 7.0, 8.0], 0.0),
        ([-h - 9.0, 8.0], [5.0, 7.0, 9.0], 0.0),
        ([-h - 8.0, -4.0], [4.0, 5.0, 7.0], 15.0),
        ([-h - 10.0, -15.0], [6.0, 6.0, 11.0], 0.0),
    ];
    for (k, (c, size, yaw)) in outer.into_iter().enumerate() {
        boxes.push(block(c, size, yaw, 40.0 + 10.0 * (k % 5) as f32));
    }
    let o = h + 3.5;
    let poles = vec![
        line_pole([-5.0, -o], 6.0),
        line_pole([6.0, -o], 6.0),
        line_pole([o, -6.0], 5.0),
        line_pole([o, 6.0], 7.0),
        line_pole([5.0, o], 6.0),
        line_pole([-6.0, o], 5.0),
        line_pole([-o, 5.0], 6.0),
        line_pole([-o, -6.0], 7.0),
    ];
    SceneSpec {
        frames: 200,
        noise_sigma: 0.02,
        sensor: SensorSpec {
            max_range: 30.0,
            ..Default::default()
        },
        trajectory: TrajectorySpec::RoundedSquare {
            step: 0.5,
            side,
            corner_radius: r,
            center: [0.0, 0.0],
        },
        boxes,
        poles,
        beams: vec![beam([-5.0, -o, 5.5], [6.0, -o, 5.5]), beam([5.0, o, 5.0], [-6.0, o, 5.0])],
        ..Default::default()
    }
}
