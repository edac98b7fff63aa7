//! Non-maximum suppression and voxel-grid thinning. Both return indices
//! in ascending order so results do not depend on hashing order.

use std::collections::HashMap;

use nalgebra::Vector3;

type Voxel = (i64, i64, i64);

fn voxel_of(p: &Vector3<f64>, size: f64) -> Voxel {
    (
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    )
}

/// Greedy NMS: visiting points by descending score, a point is kept unless
/// a kept point lies within `radius`. Kept points form an independent set.
pub fn nms(positions: &[Vector3<f64>], scores: &[f64], radius: f64) -> Vec<usize> {
    debug_assert_eq!(positions.len(), scores.len());
    if radius <= 0.0 {
        return (0..positions.len()).collect();
    }
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let r2 = radius * radius;
    let mut kept_cells: HashMap<Voxel, Vec<usize>> = HashMap::new();
    let mut kept = Vec::new();
    for i in order {
        let p = &positions[i];
        let c = voxel_of(p, radius);
        let mut blocked = false;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = kept_cells.get(&(c.0 + dx, c.1 + dy, c.2 + dz)) {
                        if list.iter().any(|&j| (positions[j] - p).norm_squared() <= r2) {
                            blocked = true;
                            break 'search;
                        }
                    }
                }
            }
        }
        if !blocked {
            kept_cells.entry(c).or_default().push(i);
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

/// One representative per occupied voxel: the highest-scoring point, ties to
/// the lowest index.
pub fn voxel_select(positions: &[Vector3<f64>], scores: &[f64], size: f64) -> Vec<usize> {
    let mut best: HashMap<Voxel, usize> = HashMap::new();
    for (i, p) in positions.iter().enumerate() {
        best.entry(voxel_of(p, size))
            .and_modify(|j| {
                if scores[i] > scores[*j] {
                    *j = i;
                }
            })
            .or_insert(i);
    }
    let mut out: Vec<usize> = best.into_values().collect();
    out.sort_unstable();
    out
}
