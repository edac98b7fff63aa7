//! Seeded synthetic LiDAR sequences: a multi-ring sensor ray-cast against
//! simple urban primitives along a parametric trajectory.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{write_kitti_bin, write_kitti_poses};
use crate::types::{Point, PointCloud, Pose};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSpec {
    pub rings: usize,
    pub azimuth_steps: usize,
    pub min_elevation_deg: f64,
    pub max_elevation_deg: f64,
    pub min_range: f64,
    pub max_range: f64,
    /// Sensor height above the trajectory plane (m).
    pub height: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        SensorSpec {
            rings: 32,
            azimuth_steps: 900,
            min_elevation_deg: -25.0,
            max_elevation_deg: 5.0,
            min_range: 1.0,
            max_range: 40.0,
            height: 1.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    Static {
        #[serde(default)]
        position: [f64; 2],
        #[serde(default)]
        heading_deg: f64,
    },
    Line {
        step: f64,
        #[serde(default)]
        start: [f64; 2],
        #[serde(default)]
        heading_deg: f64,
    },
    /// Counter-clockwise square with rounded corners, starting at the middle
    /// of the lower side heading +x.
    RoundedSquare {
        step: f64,
        side: f64,
        corner_radius: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    Circle {
        step: f64,
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
    },
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        TrajectorySpec::Line {
            step: 0.5,
            start: [0.0, 0.0],
            heading_deg: 0.0,
        }
    }
}

impl TrajectorySpec {
    /// Planar position and heading after `s` meters.
    fn at_distance(&self, s: f64) -> (Vector2<f64>, f64) {
        match *self {
            TrajectorySpec::Static { position, heading_deg } => (position.into(), heading_deg.to_radians()),
            TrajectorySpec::Line { start, heading_deg, .. } => {
                let h = heading_deg.to_radians();
                (Vector2::from(start) + Vector2::new(h.cos(), h.sin()) * s, h)
            }
            TrajectorySpec::Circle { radius, center, .. } => {
                let a = s / radius;
                let c = Vector2::from(center);
                (c + Vector2::new(a.sin(), -a.cos()) * radius, a)
            }
            TrajectorySpec::RoundedSquare { side, corner_radius, center, .. } => {
                rounded_square(side, corner_radius, Vector2::from(center), s)
            }
        }
    }

    fn step(&self) -> f64 {
        match *self {
            TrajectorySpec::Static { .. } => 0.0,
            TrajectorySpec::Line { step, .. }
            | TrajectorySpec::RoundedSquare { step, .. }
            | TrajectorySpec::Circle { step, .. } => step,
        }
    }
}

fn rounded_square(side: f64, r: f64, center: Vector2<f64>, s: f64) -> (Vector2<f64>, f64) {
    let straight = side - 2.0 * r;
    let arc = FRAC_PI_2 * r;
    let perimeter = 4.0 * (straight + arc);
    let mut rest = s.rem_euclid(perimeter);
    let mut p = center + Vector2::new(0.0, -side / 2.0);
    let mut heading = 0.0f64;
    // Half a side, then four (corner, side) pairs; the last side is cut short by the wrap.
    let mut pieces = vec![(straight / 2.0, false)];
    for _ in 0..4 {
        pieces.push((arc, true));
        pieces.push((straight, false));
    }
    for (len, is_arc) in pieces {
        let take = rest.min(len);
        let dir = Vector2::new(heading.cos(), heading.sin());
        if is_arc {
            let left = Vector2::new(-dir.y, dir.x);
            let c = p + left * r;
            let a = take / r;
            let (sin, cos) = a.sin_cos();
            let rel = p - c;
            p = c + Vector2::new(cos * rel.x - sin * rel.y, sin * rel.x + cos * rel.y);
            heading += a;
        } else {
            p += dir * take;
        }
        rest -= take;
        if rest <= 0.0 {
            break;
        }
    }
    (p, heading)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundSpec {
    #[serde(default)]
    pub z: f64,
    #[serde(default = "default_intensity")]
    pub intensity: f32,
}

fn default_intensity() -> f32 {
    40.0
}

/// Vertical rectangle over the segment `from`–`to`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallSpec {
    pub from: [f64; 2],
    pub to: [f64; 2],
    #[serde(default)]
    pub z_min: f64,
    pub z_max: f64,
    #[serde(default = "default_intensity")]
    pub intensity: f32,
}

/// Yawed box standing on `center.z`; moves by `velocity` per frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub center: [f64; 3],
    pub size: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
    #[serde(default)]
    pub velocity: [f64; 3],
    #[serde(default = "default_intensity")]
    pub intensity: f32,
}

/// Horizontal rectangle (roof, canopy).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlabSpec {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub z: f64,
    #[serde(default = "default_intensity")]
    pub intensity: f32,
}

/// Vertical cylinder; radius 0 makes it an ideal line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoleSpec {
    pub position: [f64; 2],
    #[serde(default)]
    pub z_min: f64,
    pub z_max: f64,
    #[serde(default)]
    pub radius: f64,
    #[serde(default = "default_intensity")]
    pub intensity: f32,
}

/// Ideal line segment (rails, bars, cables).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSpec {
    pub from: [f64; 3],
    pub to: [f64; 3],
    #[serde(default = "default_intensity")]
    pub intensity: f32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    pub frames: usize,
    /// Isotropic Gaussian point noise (m).
    pub noise_sigma: f64,
    /// Emit per-point sweep timestamps and distort points by the motion
    /// during the sweep.
    pub timestamps: bool,
    pub sensor: SensorSpec,
    pub trajectory: TrajectorySpec,
    pub ground: Option<GroundSpec>,
    pub walls: Vec<WallSpec>,
    pub boxes: Vec<BoxSpec>,
    pub slabs: Vec<SlabSpec>,
    pub poles: Vec<PoleSpec>,
    pub beams: Vec<BeamSpec>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            seed: 0,
            frames: 10,
            noise_sigma: 0.0,
            timestamps: false,
            sensor: SensorSpec::default(),
            trajectory: TrajectorySpec::default(),
            ground: Some(GroundSpec {
                z: 0.0,
                intensity: default_intensity(),
            }),
            walls: Vec::new(),
            boxes: Vec::new(),
            slabs: Vec::new(),
            poles: Vec::new(),
            beams: Vec::new(),
        }
    }
}

struct Ray {
    origin: Vector3<f64>,
    dir: Vector3<f64>,
}

struct Hit {
    t: f64,
    intensity: f32,
}

fn closer(best: &mut Option<Hit>, t: f64, intensity: f32, lo: f64, hi: f64) {
    if t >= lo && t <= hi && best.as_ref().is_none_or(|b| t < b.t) {
        *best = Some(Hit { t, intensity });
    }
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SceneSpec = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            reason: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sensor;
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if s.rings == 0 || s.azimuth_steps == 0 {
            return bad("sensor needs at least one ring and one azimuth step");
        }
        if !(s.min_range >= 0.0 && s.max_range > s.min_range) {
            return bad("sensor range must satisfy 0 <= min_range < max_range");
        }
        if s.max_elevation_deg < s.min_elevation_deg {
            return bad("max_elevation_deg below min_elevation_deg");
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be nonnegative");
        }
        match self.trajectory {
            TrajectorySpec::RoundedSquare { side, corner_radius, .. }
                if !(corner_radius > 0.0 && 2.0 * corner_radius <= side) =>
            {
                bad("rounded square needs 0 < corner_radius <= side / 2")
            }
            TrajectorySpec::Circle { radius, .. } if radius <= 0.0 => bad("circle radius must be positive"),
            _ => Ok(()),
        }
    }

    /// Sensor pose at continuous frame time `t` (frame index units).
    pub fn pose_at(&self, t: f64) -> Pose {
        let (xy, heading) = self.trajectory.at_distance(t * self.trajectory.step());
        let ground = self.ground.as_ref().map_or(0.0, |g| g.z);
        Pose::new(
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), heading),
            Vector3::new(xy.x, xy.y, ground + self.sensor.height),
        )
    }

    pub fn ground_truth(&self) -> Vec<Pose> {
        (0..self.frames).map(|i| self.pose_at(i as f64)).collect()
    }

    fn cast(&self, ray: &Ray, time: f64, lo: f64, hi: f64) -> Option<Hit> {
        let (o, d) = (ray.origin, ray.dir);
        let mut best = None;
        if let Some(g) = &self.ground {
            if d.z < -1e-12 {
                closer(&mut best, (g.z - o.z) / d.z, g.intensity, lo, hi);
            }
        }
        for w in &self.walls {
            let a = Vector2::from(w.from);
            let b = Vector2::from(w.to);
            let e = b - a;
            let n = Vector2::new(-e.y, e.x);
            let denom = n.dot(&d.xy());
            if denom.abs() < 1e-12 {
                continue;
            }
            let t = n.dot(&(a - o.xy())) / denom;
            let p = o + d * t;
            let u = (p.xy() - a).dot(&e) / e.norm_squared();
            if (0.0..=1.0).contains(&u) && p.z >= w.z_min && p.z <= w.z_max {
                closer(&mut best, t, w.intensity, lo, hi);
            }
        }
        for bx in &self.boxes {
            let c = Vector3::from(bx.center) + Vector3::from(bx.velocity) * time;
            let (sin, cos) = (-bx.yaw_deg.to_radians()).sin_cos();
            let rot = |v: Vector3<f64>| Vector3::new(cos * v.x - sin * v.y, sin * v.x + cos * v.y, v.z);
            let lo_o = rot(o - c);
            let ld = rot(d);
            let half = Vector3::new(bx.size[0] / 2.0, bx.size[1] / 2.0, 0.0);
            let (bmin, bmax) = (-half, Vector3::new(half.x, half.y, bx.size[2]));
            let mut t0 = f64::NEG_INFINITY;
            let mut t1 = f64::INFINITY;
            let mut inside = true;
            for k in 0..3 {
                if ld[k].abs() < 1e-12 {
                    if lo_o[k] < bmin[k] || lo_o[k] > bmax[k] {
                        inside = false;
                        break;
                    }
                } else {
                    let ta = (bmin[k] - lo_o[k]) / ld[k];
                    let tb = (bmax[k] - lo_o[k]) / ld[k];
                    t0 = t0.max(ta.min(tb));
                    t1 = t1.min(ta.max(tb));
                }
            }
            if inside && t0 <= t1 && t0 > 0.0 {
                closer(&mut best, t0, bx.intensity, lo, hi);
            }
        }
        for s in &self.slabs {
            if d.z.abs() < 1e-12 {
                continue;
            }
            let t = (s.z - o.z) / d.z;
            let p = o + d * t;
            if p.x >= s.min[0] && p.x <= s.max[0] && p.y >= s.min[1] && p.y <= s.max[1] {
                closer(&mut best, t, s.intensity, lo, hi);
            }
        }
        for pole in self.poles.iter().filter(|p| p.radius > 0.0) {
            let rel = o.xy() - Vector2::from(pole.position);
            let dd = d.xy();
            let a = dd.norm_squared();
            if a < 1e-12 {
                continue;
            }
            let b = 2.0 * rel.dot(&dd);
            let c = rel.norm_squared() - pole.radius * pole.radius;
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                continue;
            }
            let t = (-b - disc.sqrt()) / (2.0 * a);
            let z = o.z + d.z * t;
            if z >= pole.z_min && z <= pole.z_max {
                closer(&mut best, t, pole.intensity, lo, hi);
            }
        }
        best
    }

    /// Cloud of frame `index` in the sensor frame, and its true pose.
    pub fn generate_frame(&self, index: usize) -> (PointCloud, Pose) {
        let s = &self.sensor;
        let pose = self.pose_at(index as f64);
        let ring_elev = |r: usize| {
            if s.rings == 1 {
                s.min_elevation_deg.to_radians()
            } else {
                (s.min_elevation_deg + (s.max_elevation_deg - s.min_elevation_deg) * r as f64 / (s.rings - 1) as f64)
                    .to_radians()
            }
        };
        let az_step = 2.0 * PI / s.azimuth_steps as f64;
        let ratio = |k: usize| {
            if self.timestamps && s.azimuth_steps > 1 {
                1.0 - k as f64 / (s.azimuth_steps - 1) as f64
            } else {
                0.0
            }
        };

        // (local point, intensity, sweep ratio) per ray, in ray order.
        let hits: Vec<(Vector3<f64>, f32, f64)> = (0..s.azimuth_steps)
            .into_par_iter()
            .flat_map_iter(|k| {
                let sweep = ratio(k);
                let time = index as f64 - sweep;
                let at = if sweep == 0.0 { pose } else { self.pose_at(time) };
                let az = k as f64 * az_step;
                (0..s.rings).filter_map(move |r| {
                    let e = ring_elev(r);
                    let local = Vector3::new(e.cos() * az.cos(), e.cos() * az.sin(), e.sin());
                    let ray = Ray {
                        origin: at.translation(),
                        dir: at.rotate(&local),
                    };
                    self.cast(&ray, time, s.min_range, s.max_range)
                        .map(|h| (local * h.t, h.intensity, sweep))
                })
            })
            .collect();

        let mut line_points = Vec::new();
        for (from, to, intensity) in self.line_primitives() {
            self.sample_line(&pose, from, to, intensity, index as f64, &mut line_points);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let noise = Normal::new(0.0, self.noise_sigma.max(0.0)).expect("finite sigma");
        let mut jitter = |p: Vector3<f64>| {
            if self.noise_sigma > 0.0 {
                p + Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))
            } else {
                p
            }
        };
        let mut points = Vec::with_capacity(hits.len() + line_points.len());
        for (p, intensity, sweep) in hits.into_iter().chain(line_points) {
            let q = jitter(p).cast::<f32>();
            let mut pt = Point::new(q.x, q.y, q.z, intensity);
            if self.timestamps {
                pt = pt.with_timestamp(sweep as f32);
            }
            points.push(pt);
        }
        (PointCloud::new(points, index as u64), pose)
    }

    fn line_primitives(&self) -> Vec<(Vector3<f64>, Vector3<f64>, f32)> {
        let mut out: Vec<_> = self
            .poles
            .iter()
            .filter(|p| p.radius <= 0.0)
            .map(|p| {
                (
                    Vector3::new(p.position[0], p.position[1], p.z_min),
                    Vector3::new(p.position[0], p.position[1], p.z_max),
                    p.intensity,
                )
            })
            .collect();
        out.extend(self.beams.iter().map(|b| (Vector3::from(b.from), Vector3::from(b.to), b.intensity)));
        out
    }

    /// Samples a visible line at the sensor's angular resolution.
    fn sample_line(
        &self,
        pose: &Pose,
        from: Vector3<f64>,
        to: Vector3<f64>,
        intensity: f32,
        time: f64,
        out: &mut Vec<(Vector3<f64>, f32, f64)>,
    ) {
        let s = &self.sensor;
        let o = pose.translation();
        let len = (to - from).norm();
        if len == 0.0 {
            return;
        }
        let dir = (to - from) / len;
        let angular = (2.0 * PI / s.azimuth_steps as f64)
            .min((s.max_elevation_deg - s.min_elevation_deg).to_radians() / s.rings.max(2) as f64);
        let to_local = pose.inverse();
        let mut u = 0.0;
        while u <= len {
            let p = from + dir * u;
            let range = (p - o).norm();
            u += (range * angular).max(0.02);
            if range < s.min_range || range > s.max_range {
                continue;
            }
            let local = to_local.apply(&p);
            let elev = (local.z / range).asin().to_degrees();
            if elev < s.min_elevation_deg || elev > s.max_elevation_deg {
                continue;
            }
            let ray = Ray {
                origin: o,
                dir: (p - o) / range,
            };
            if self.cast(&ray, time, 1e-6, range - 0.05).is_some() {
                continue;
            }
            out.push((local, intensity, 0.0));
        }
    }

    /// Dense world-frame samples of the static surfaces (ground excluded),
    /// for mapping-error reference.
    pub fn reference_cloud(&self, spacing: f64) -> Vec<Vector3<f64>> {
        let mut out = Vec::new();
        let steps = |len: f64| ((len / spacing).ceil() as usize).max(1);
        let mut rect = |origin: Vector3<f64>, u: Vector3<f64>, v: Vector3<f64>| {
            let (nu, nv) = (steps(u.norm()), steps(v.norm()));
            for i in 0..=nu {
                for j in 0..=nv {
                    out.push(origin + u * (i as f64 / nu as f64) + v * (j as f64 / nv as f64));
                }
            }
        };
        for w in &self.walls {
            let a = Vector3::new(w.from[0], w.from[1], w.z_min);
            let b = Vector3::new(w.to[0], w.to[1], w.z_min);
            rect(a, b - a, Vector3::new(0.0, 0.0, w.z_max - w.z_min));
        }
        for s in &self.slabs {
            rect(
                Vector3::new(s.min[0], s.min[1], s.z),
                Vector3::new(s.max[0] - s.min[0], 0.0, 0.0),
                Vector3::new(0.0, s.max[1] - s.min[1], 0.0),
            );
        }
        for bx in self.boxes.iter().filter(|b| b.velocity == [0.0; 3]) {
            let c = Vector3::from(bx.center);
            let (sin, cos) = bx.yaw_deg.to_radians().sin_cos();
            let ex = Vector3::new(cos, sin, 0.0) * bx.size[0];
            let ey = Vector3::new(-sin, cos, 0.0) * bx.size[1];
            let ez = Vector3::z() * bx.size[2];
            let corner = c - ex / 2.0 - ey / 2.0;
            rect(corner, ex, ez);
            rect(corner, ey, ez);
            rect(corner + ex, ey, ez);
            rect(corner + ey, ex, ez);
            rect(corner + ez, ex, ey);
        }
        for (from, to, _) in self.line_primitives() {
            let n = steps((to - from).norm());
            out.extend((0..=n).map(|k| from + (to - from) * (k as f64 / n as f64)));
        }
        out
    }

    /// Writes `velodyne/NNNNNN.bin`, `poses.txt` and `scene.json` under `dir`.
    pub fn write_sequence(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let velodyne = dir.join("velodyne");
        std::fs::create_dir_all(&velodyne).map_err(|e| Error::io(&velodyne, e))?;
        let mut poses = Vec::with_capacity(self.frames);
        for i in 0..self.frames {
            let (cloud, pose) = self.generate_frame(i);
            write_kitti_bin(&cloud, velodyne.join(format!("{i:06}.bin")))?;
            poses.push(pose);
        }
        write_kitti_poses(&poses, dir.join("poses.txt"))?;
        let spec_path = dir.join("scene.json");
        std::fs::write(&spec_path, self.to_json()).map_err(|e| Error::io(&spec_path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn plane_only() -> SceneSpec {
        SceneSpec {
            frames: 2,
            trajectory: TrajectorySpec::Static {
                position: [0.0, 0.0],
                heading_deg: 0.0,
            },
            ..Default::default()
        }
    }

    #[test]
    fn noiseless_plane_is_exact() {
        let spec = plane_only();
        let (cloud, pose) = spec.generate_frame(0);
        assert!(cloud.len() > 1000);
        for p in &cloud.points {
            let w = pose.apply(&p.xyz());
            assert!(w.z.abs() < 1e-5, "{w}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let mut spec = SceneSpec::preset("loop").unwrap();
        spec.noise_sigma = 0.02;
        let (a, _) = spec.generate_frame(3);
        let (b, _) = spec.generate_frame(3);
        assert_eq!(a, b);
        spec.seed = 1;
        let (c, _) = spec.generate_frame(3);
        assert_ne!(a, c);
    }

    #[test]
    fn rounded_square_closes() {
        let t = TrajectorySpec::RoundedSquare {
            step: 0.5,
            side: 25.0,
            corner_radius: 4.0,
            center: [0.0, 0.0],
        };
        let perimeter = 4.0 * (17.0 + FRAC_PI_2 * 4.0);
        let (a, ha) = t.at_distance(0.0);
        let (b, hb) = t.at_distance(perimeter - 1e-9);
        assert!((a - b).norm() < 1e-6);
        assert_relative_eq!(ha, 0.0);
        assert_relative_eq!(hb, 2.0 * PI, epsilon = 1e-6);
        // Continuous: consecutive samples 0.5 m apart (chord ≤ arc).
        for k in 0..200 {
            let (p, _) = t.at_distance(k as f64 * 0.5);
            let (q, _) = t.at_distance(k as f64 * 0.5 + 0.5);
            let d = (p - q).norm();
            assert!(d <= 0.5 + 1e-9 && d > 0.49, "{k}: {d}");
        }
    }

    #[test]
    fn line_pole_is_sampled_and_occluded() {
        let mut spec = plane_only();
        spec.poles.push(PoleSpec {
            position: [10.0, 0.0],
            z_min: 0.0,
            z_max: 4.0,
            radius: 0.0,
            intensity: 90.0,
        });
        let (cloud, pose) = spec.generate_frame(0);
        let on_pole = cloud
            .points
            .iter()
            .filter(|p| p.intensity == 90.0)
            .map(|p| pose.apply(&p.xyz()))
            .collect::<Vec<_>>();
        assert!(on_pole.len() > 10);
        assert!(on_pole.iter().all(|p| (p.xy() - Vector2::new(10.0, 0.0)).norm() < 1e-5));

        spec.walls.push(WallSpec {
            from: [5.0, -3.0],
            to: [5.0, 3.0],
            z_min: 0.0,
            z_max: 6.0,
            intensity: 10.0,
        });
        let (cloud, _) = spec.generate_frame(0);
        assert!(cloud.points.iter().all(|p| p.intensity != 90.0));
    }

    #[test]
    fn timestamps_and_motion() {
        let mut spec = SceneSpec::preset("corridor").unwrap();
        spec.timestamps = true;
        let (cloud, _) = spec.generate_frame(2);
        assert!(cloud.has_timestamps());
        assert!(cloud.points.iter().all(|p| (0.0..=1.0).contains(&p.timestamp_ratio.unwrap())));
    }

    #[test]
    fn json_round_trip() {
        for name in SceneSpec::PRESETS {
            let spec = SceneSpec::preset(name).unwrap();
            let back = SceneSpec::from_json(&spec.to_json()).unwrap();
            assert_eq!(spec, back);
        }
        assert!(SceneSpec::from_json(r#"{"frames": 3, "bogus": 1}"#).is_err());
        let s = SceneSpec::from_json(r#"{"frames": 3, "trajectory": {"kind": "line", "step": 1.0}}"#).unwrap();
        assert_eq!(s.frames, 3);
        assert!(SceneSpec::preset("nope").is_none());
    }
}
