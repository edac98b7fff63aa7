//! Submap pose graph: edges, objective, damped Gauss-Newton optimizer and
//! a plain-text dump format.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector, Matrix6, SymmetricEigen, Vector6};

use crate::config::BackendConfig;
use crate::error::{Error, Result};
use crate::types::{Pose, TangentVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    Adjacent,
    Loop,
}

/// Relative-pose constraint: `measurement` is the pose of node `to` in
/// the frame of node `from`. The information matrix is expressed in the
/// tangent ordering `(t, angles)` of a left perturbation in the `from`
/// frame, which is what registration reports.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseGraphEdge {
    pub from: usize,
    pub to: usize,
    pub measurement: Pose,
    pub information: Matrix6<f64>,
    pub kind: EdgeKind,
}

impl PoseGraphEdge {
    pub fn new(from: usize, to: usize, measurement: Pose, information: Matrix6<f64>, kind: EdgeKind) -> Result<Self> {
        if from == to {
            return Err(Error::InvalidArgument(format!("edge {from} -> {to} is a self loop")));
        }
        if !is_symmetric_psd(&information) {
            return Err(Error::InvalidArgument(format!(
                "edge {from} -> {to}: information matrix is not symmetric PSD"
            )));
        }
        Ok(PoseGraphEdge {
            from,
            to,
            measurement,
            information,
            kind,
        })
    }
}

pub fn is_symmetric_psd(m: &Matrix6<f64>) -> bool {
    let scale = m.abs().max().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).abs().max() > 1e-9 * scale || !m.iter().all(|v| v.is_finite()) {
        return false;
    }
    SymmetricEigen::new(*m).eigenvalues.min() >= -1e-9 * scale
}

/// Node poses (world) with one fixed gauge node, plus edges.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PoseGraph {
    pub nodes: Vec<Pose>,
    pub fixed: usize,
    pub edges: Vec<PoseGraphEdge>,
}

/// Residual of one edge: the error transform `E = (Xi⁻¹ Xj) Z⁻¹` as its
/// translation and twice the vector part of its quaternion (w ≥ 0).
pub fn edge_residual(xi: &Pose, xj: &Pose, z: &Pose) -> Vector6<f64> {
    let e = xi.between(xj).compose(&z.inverse());
    let mut q = e.rotation().into_inner();
    if q.w < 0.0 {
        q = -q;
    }
    let t = e.translation();
    Vector6::new(t.x, t.y, t.z, 2.0 * q.i, 2.0 * q.j, 2.0 * q.k)
}

/// `Σ rᵀ 𝓘 r` over all edges at the given node poses.
pub fn objective(edges: &[PoseGraphEdge], nodes: &[Pose]) -> f64 {
    edges
        .iter()
        .map(|e| {
            let r = edge_residual(&nodes[e.from], &nodes[e.to], &e.measurement);
            (r.transpose() * e.information * r)[0]
        })
        .sum()
}

/// Connected components over all edges, each sorted, ordered by their
/// smallest node.
pub fn components(n: usize, edges: &[PoseGraphEdge]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for e in edges {
        let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PgoOptions {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this
    /// fraction.
    pub relative_tolerance: f64,
}

impl Default for PgoOptions {
    fn default() -> Self {
        PgoOptions {
            max_iterations: 50,
            relative_tolerance: 1e-9,
        }
    }
}

impl PgoOptions {
    pub fn from_config(cfg: &BackendConfig) -> Self {
        PgoOptions {
            max_iterations: cfg.pgo_max_iterations,
            relative_tolerance: cfg.pgo_relative_tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PgoReport {
    pub poses: Vec<Pose>,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
}

const JACOBIAN_STEP: f64 = 1e-6;

fn perturbed(x: &Pose, k: usize, h: f64) -> Pose {
    let mut v = Vector6::zeros();
    v[k] = h;
    Pose::from_tangent(&TangentVector::from_vector(&v)).compose(x)
}

/// Central-difference Jacobians of an edge residual with respect to left
/// perturbations of its two endpoints.
fn edge_jacobians(xi: &Pose, xj: &Pose, z: &Pose) -> (Matrix6<f64>, Matrix6<f64>) {
    let mut ji = Matrix6::zeros();
    let mut jj = Matrix6::zeros();
    let h = JACOBIAN_STEP;
    for k in 0..6 {
        let dp = edge_residual(&perturbed(xi, k, h), xj, z);
        let dm = edge_residual(&perturbed(xi, k, -h), xj, z);
        ji.set_column(k, &((dp - dm) / (2.0 * h)));
        let dp = edge_residual(xi, &perturbed(xj, k, h), z);
        let dm = edge_residual(xi, &perturbed(xj, k, -h), z);
        jj.set_column(k, &((dp - dm) / (2.0 * h)));
    }
    (ji, jj)
}

/// Levenberg-Marquardt over left perturbations of every free node. The
/// fixed node is never written. Fails on a disconnected graph.
pub fn optimize_graph(graph: &PoseGraph, opts: &PgoOptions) -> Result<PgoReport> {
    let n = graph.nodes.len();
    if graph.fixed >= n {
        return Err(Error::InvalidArgument(format!("fixed node {} out of range", graph.fixed)));
    }
    for e in &graph.edges {
        if e.from >= n || e.to >= n {
            return Err(Error::InvalidArgument(format!("edge {} -> {} references a missing node", e.from, e.to)));
        }
    }
    let comps = components(n, &graph.edges);
    if comps.len() > 1 {
        return Err(Error::Disconnected { components: comps });
    }

    // Free-node index into the stacked parameter vector.
    let slot: Vec<Option<usize>> = {
        let mut k = 0;
        (0..n)
            .map(|i| {
                (i != graph.fixed).then(|| {
                    k += 1;
                    k - 1
                })
            })
            .collect()
    };
    let dim = 6 * (n - 1);
    let mut poses = graph.nodes.clone();
    let initial_cost = objective(&graph.edges, &poses);
    let mut cost = initial_cost;
    let mut lambda = 1e-6;
    let mut iterations = 0;

    while iterations < opts.max_iterations && dim > 0 && cost > 0.0 {
        iterations += 1;
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        let mut g = DVector::<f64>::zeros(dim);
        for e in &graph.edges {
            let (xi, xj) = (&poses[e.from], &poses[e.to]);
            let r = edge_residual(xi, xj, &e.measurement);
            let (ji, jj) = edge_jacobians(xi, xj, &e.measurement);
            let blocks = [(slot[e.from], ji), (slot[e.to], jj)];
            for &(sa, ja) in &blocks {
                let Some(a) = sa else { continue };
                let gi = ja.transpose() * e.information * r;
                let mut gv = g.rows_mut(6 * a, 6);
                gv += gi;
                for &(sb, jb) in &blocks {
                    let Some(b) = sb else { continue };
                    let hab = ja.transpose() * e.information * jb;
                    let mut view = h.view_mut((6 * a, 6 * b), (6, 6));
                    view += hab;
                }
            }
        }

        let mut accepted = false;
        while lambda < 1e12 {
            let mut damped = h.clone();
            for i in 0..dim {
                damped[(i, i)] += lambda * h[(i, i)].max(1e-12);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&g));
            let trial: Vec<Pose> = poses
                .iter()
                .enumerate()
                .map(|(i, p)| match slot[i] {
                    Some(s) => {
                        let d = Vector6::from_iterator(delta.rows(6 * s, 6).iter().copied());
                        Pose::from_tangent(&TangentVector::from_vector(&d)).compose(p)
                    }
                    None => *p,
                })
                .collect();
            let trial_cost = objective(&graph.edges, &trial);
            if trial_cost < cost {
                let decrease = (cost - trial_cost) / cost;
                poses = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if decrease < opts.relative_tolerance {
                    return Ok(PgoReport {
                        poses,
                        initial_cost,
                        final_cost: cost,
                        iterations,
                    });
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    Ok(PgoReport {
        poses,
        initial_cost,
        final_cost: cost,
        iterations,
    })
}

/// Member poses of a chain-topology submap: the corrected reference
/// composed with each stored reference-relative pose.
pub fn distribute_inner(corrected_reference: &Pose, relative_members: &[(u64, Pose)]) -> Vec<(u64, Pose)> {
    relative_members
        .iter()
        .map(|(id, rel)| (*id, corrected_reference.compose(rel)))
        .collect()
}

/// Adjoint of `T = (R, p)` for the `(t, angles)` ordering:
/// `T exp(ξ) T⁻¹ = exp(Ad ξ)`.
pub fn adjoint(t: &Pose) -> Matrix6<f64> {
    let r = t.rotation_matrix();
    let p = t.translation();
    let mut ad = Matrix6::zeros();
    ad.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    ad.fixed_view_mut::<3, 3>(0, 3).copy_from(&(p.cross_matrix() * r));
    ad.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
    ad
}

/// Symmetrized pseudo-inverse of a PSD 6×6 matrix; eigenvalues below
/// `1e-12 · λmax` are treated as zero.
pub fn psd_inverse(m: &Matrix6<f64>) -> Matrix6<f64> {
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let cut = eig.eigenvalues.max() * 1e-12;
    let mut inv = Matrix6::zeros();
    for k in 0..6 {
        let l = eig.eigenvalues[k];
        if l > cut && l > 0.0 {
            let v = eig.eigenvectors.column(k);
            inv += v * v.transpose() / l;
        }
    }
    (inv + inv.transpose()) * 0.5
}

fn write_reals(out: &mut String, vals: impl IntoIterator<Item = f64>) {
    for v in vals {
        let _ = write!(out, " {v:e}");
    }
}

impl PoseGraph {
    /// `NODE id <12 reals>` per node, then
    /// `EDGE from to <12 reals> <21 reals>` per edge: row-major 3×4 pose
    /// followed by the upper triangle of the information matrix, row by
    /// row.
    pub fn write_text(&self, mut w: impl Write) -> Result<()> {
        let mut s = String::new();
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = write!(s, "NODE {i}");
            write_reals(&mut s, p.to_row_major_3x4());
            s.push('\n');
        }
        for e in &self.edges {
            let _ = write!(s, "EDGE {} {}", e.from, e.to);
            write_reals(&mut s, e.measurement.to_row_major_3x4());
            write_reals(&mut s, (0..6).flat_map(|r| (r..6).map(move |c| (r, c))).map(|(r, c)| e.information[(r, c)]));
            s.push('\n');
        }
        w.write_all(s.as_bytes())
            .map_err(|e| Error::io("<pose graph>", e))
    }

    /// Parses [`PoseGraph::write_text`] output. Node 0 is fixed and
    /// edges are tagged adjacent when `to == from + 1`.
    pub fn read_text(r: impl BufRead) -> Result<PoseGraph> {
        let mut g = PoseGraph::default();
        for (ln, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<pose graph>", e))?;
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.is_empty() {
                continue;
            }
            let perr = |reason: String| Error::Parse { line: ln + 1, reason };
            let num = |s: &str| s.parse::<f64>().map_err(|_| perr(format!("bad number `{s}`")));
            let idx = |s: &str| s.parse::<usize>().map_err(|_| perr(format!("bad index `{s}`")));
            match (tok[0], tok.len()) {
                ("NODE", 14) => {
                    let id = idx(tok[1])?;
                    if id != g.nodes.len() {
                        return Err(perr(format!("node {id} out of order")));
                    }
                    let mut v = [0.0; 12];
                    for (k, t) in tok[2..].iter().enumerate() {
                        v[k] = num(t)?;
                    }
                    g.nodes.push(Pose::from_row_major_3x4(&v));
                }
                ("EDGE", 36) => {
                    let (from, to) = (idx(tok[1])?, idx(tok[2])?);
                    let mut v = [0.0; 12];
                    for (k, t) in tok[3..15].iter().enumerate() {
                        v[k] = num(t)?;
                    }
                    let mut info = Matrix6::zeros();
                    let mut k = 15;
                    for r in 0..6 {
                        for c in r..6 {
                            info[(r, c)] = num(tok[k])?;
                            info[(c, r)] = info[(r, c)];
                            k += 1;
                        }
                    }
                    let kind = if to == from + 1 { EdgeKind::Adjacent } else { EdgeKind::Loop };
                    g.edges.push(
                        PoseGraphEdge::new(from, to, Pose::from_row_major_3x4(&v), info, kind)
                            .map_err(|e| perr(e.to_string()))?,
                    );
                }
                (t, n) => return Err(perr(format!("unexpected record `{t}` with {n} fields"))),
            }
        }
        Ok(g)
    }
}

/// Angle between two rotation matrices.
#[cfg(test)]
fn rotation_angle_between(a: &nalgebra::Matrix3<f64>, b: &nalgebra::Matrix3<f64>) -> f64 {
    let c = ((a.transpose() * b).trace() - 1.0) / 2.0;
    c.clamp(-1.0, 1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn pose(x: f64, y: f64, yaw: f64) -> Pose {
        Pose::new(
            nalgebra::UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
            Vector3::new(x, y, 0.0),
        )
    }

    fn info(scale: f64) -> Matrix6<f64> {
        Matrix6::from_diagonal(&Vector6::new(100.0, 100.0, 100.0, 400.0, 400.0, 400.0)) * scale
    }

    /// Square of four nodes; the last adjacent edge carries extra drift.
    fn square(scale: f64) -> PoseGraph {
        let truth = [pose(0.0, 0.0, 0.0), pose(10.0, 0.0, 0.5), pose(10.0, 10.0, 1.5), pose(0.0, 10.0, 3.0)];
        let mut edges = Vec::new();
        for i in 0..3 {
            let mut z = truth[i].between(&truth[i + 1]);
            if i == 2 {
                z = pose(0.3, -0.2, 0.03).compose(&z);
            }
            edges.push(PoseGraphEdge::new(i, i + 1, z, info(scale), EdgeKind::Adjacent).unwrap());
        }
        edges.push(PoseGraphEdge::new(3, 0, truth[3].between(&truth[0]), info(scale), EdgeKind::Loop).unwrap());
        // Initial guess: odometry chain.
        let mut nodes = vec![truth[0]];
        for e in &edges[..3] {
            let last = *nodes.last().unwrap();
            nodes.push(last.compose(&e.measurement));
        }
        PoseGraph { nodes, fixed: 0, edges }
    }

    #[test]
    fn consistent_chain_is_a_fixed_point() {
        let nodes = vec![pose(0.0, 0.0, 0.0), pose(3.0, 1.0, 0.2), pose(5.0, 4.0, -0.7)];
        let edges = (0..2)
            .map(|i| PoseGraphEdge::new(i, i + 1, nodes[i].between(&nodes[i + 1]), info(1.0), EdgeKind::Adjacent).unwrap())
            .collect();
        let g = PoseGraph { nodes: nodes.clone(), fixed: 0, edges };
        let r = optimize_graph(&g, &PgoOptions::default()).unwrap();
        assert!(r.final_cost < 1e-20);
        for (a, b) in r.poses.iter().zip(&nodes) {
            assert!(a.between(b).translation().norm() < 1e-9);
            assert!(a.between(b).rotation_angle() < 1e-9);
        }
    }

    #[test]
    fn drifted_square_is_stationary_and_fixed_node_untouched() {
        let g = square(1.0);
        let r = optimize_graph(&g, &PgoOptions::default()).unwrap();
        assert!(r.final_cost <= r.initial_cost);
        assert_eq!(r.poses[0], g.nodes[0]);
        // Gradient of the objective vanishes at the optimum.
        let f = |p: &[Pose]| objective(&g.edges, p);
        let h = 1e-5;
        for i in 1..4 {
            for k in 0..6 {
                let mut plus = r.poses.clone();
                let mut minus = r.poses.clone();
                plus[i] = perturbed(&plus[i], k, h);
                minus[i] = perturbed(&minus[i], k, h * -1.0);
                let grad = (f(&plus) - f(&minus)) / (2.0 * h);
                assert!(grad.abs() < 1e-5, "node {i} dof {k}: {grad}");
            }
        }
    }

    #[test]
    fn information_scale_invariance() {
        let a = optimize_graph(&square(1.0), &PgoOptions::default()).unwrap();
        let b = optimize_graph(&square(37.0), &PgoOptions::default()).unwrap();
        for (p, q) in a.poses.iter().zip(&b.poses) {
            assert!(p.between(q).translation().norm() < 1e-9);
            assert!(p.between(q).rotation_angle() < 1e-9);
        }
    }

    #[test]
    fn fixed_node_in_the_middle() {
        let mut g = square(1.0);
        g.fixed = 2;
        g.nodes[2] = pose(10.0, 10.0, 1.5);
        let r = optimize_graph(&g, &PgoOptions::default()).unwrap();
        assert_eq!(r.poses[2], g.nodes[2]);
    }

    #[test]
    fn disconnected_graph_lists_components() {
        let mut g = square(1.0);
        g.nodes.push(pose(50.0, 0.0, 0.0));
        g.nodes.push(pose(60.0, 0.0, 0.0));
        g.edges.push(PoseGraphEdge::new(4, 5, pose(10.0, 0.0, 0.0), info(1.0), EdgeKind::Adjacent).unwrap());
        match optimize_graph(&g, &PgoOptions::default()) {
            Err(Error::Disconnected { components }) => assert_eq!(components, vec![vec![0, 1, 2, 3], vec![4, 5]]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn edge_validation() {
        assert!(PoseGraphEdge::new(1, 1, Pose::identity(), info(1.0), EdgeKind::Loop).is_err());
        let mut bad = info(1.0);
        bad[(0, 1)] = 5.0;
        assert!(PoseGraphEdge::new(0, 1, Pose::identity(), bad, EdgeKind::Loop).is_err());
        let neg = -info(1.0);
        assert!(PoseGraphEdge::new(0, 1, Pose::identity(), neg, EdgeKind::Loop).is_err());
    }

    #[test]
    fn residual_matches_left_perturbation_to_first_order() {
        let xi = pose(1.0, 2.0, 0.3);
        let z = pose(4.0, -1.0, 0.8);
        let d = TangentVector::new(1e-4, -2e-4, 3e-4, 2e-4, -1e-4, 1.5e-4);
        // Xj such that Xi⁻¹ Xj = exp(d) Z.
        let xj = xi.compose(&Pose::from_tangent(&d).compose(&z));
        let r = edge_residual(&xi, &xj, &z);
        assert!((r - d.to_vector()).norm() < 1e-7);
    }

    #[test]
    fn adjoint_conjugates_perturbations() {
        let t = pose(3.0, -2.0, 0.9).compose(&Pose::from_axis_angle(&Vector3::x(), 0.4));
        // First-order identity: the mismatch is O(|ξ|²).
        let xi = TangentVector::new(1e-7, 2e-7, -1e-7, 3e-7, -2e-7, 1e-7);
        let lhs = t.compose(&Pose::from_tangent(&xi)).compose(&t.inverse());
        let rhs = Pose::from_tangent(&TangentVector::from_vector(&(adjoint(&t) * xi.to_vector())));
        assert!(lhs.between(&rhs).translation().norm() < 1e-12);
        assert!(lhs.between(&rhs).rotation_angle() < 1e-12);
    }

    #[test]
    fn psd_inverse_of_diagonal() {
        let m = info(2.0);
        assert_relative_eq!(psd_inverse(&m) * m, Matrix6::identity(), epsilon = 1e-12);
    }

    #[test]
    fn distribute_rotates_members_rigidly() {
        let reference = pose(5.0, 1.0, 0.2);
        let members = vec![(3, pose(-2.0, 0.0, -0.1)), (4, pose(-1.0, 0.0, 0.0)), (5, Pose::identity())];
        let unchanged = distribute_inner(&reference, &members);
        for ((_, p), (_, rel)) in unchanged.iter().zip(&members) {
            assert_eq!(*p, reference.compose(rel));
        }
        let rot = Pose::from_axis_angle(&Vector3::z(), 1f64.to_radians());
        let corrected = rot.compose(&reference);
        let moved = distribute_inner(&corrected, &members);
        for ((_, a), (_, b)) in moved.iter().zip(&unchanged) {
            let expect = rot.compose(b);
            assert!(a.between(&expect).translation().norm() < 1e-12);
        }
    }

    #[test]
    fn chain_distribution_equals_inner_optimization() {
        let reference = pose(5.0, 1.0, 0.2);
        let members = vec![(3, pose(-2.0, 0.1, -0.1)), (4, pose(-1.0, 0.05, 0.02)), (5, Pose::identity())];
        let corrected = Pose::from_axis_angle(&Vector3::z(), 1f64.to_radians()).compose(&reference);
        // Inner graph: members in order, last member is the reference and
        // is fixed at its corrected pose; odometry edges between them.
        let mut nodes: Vec<Pose> = members.iter().map(|(_, r)| reference.compose(r)).collect();
        let last = nodes.len() - 1;
        nodes[last] = corrected;
        let edges = (0..last)
            .map(|i| {
                PoseGraphEdge::new(i, i + 1, members[i].1.between(&members[i + 1].1), info(3.0 + i as f64), EdgeKind::Adjacent)
                    .unwrap()
            })
            .collect();
        let g = PoseGraph { nodes, fixed: last, edges };
        let r = optimize_graph(&g, &PgoOptions::default()).unwrap();
        for (opt, (_, dist)) in r.poses.iter().zip(distribute_inner(&corrected, &members)) {
            assert!(opt.between(&dist).translation().norm() < 1e-9);
            assert!(opt.between(&dist).rotation_angle() < 1e-9);
        }
    }

    #[test]
    fn text_round_trip() {
        let g = square(2.0);
        let mut buf = Vec::new();
        g.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().starts_with("NODE 0 "));
        assert_eq!(text.lines().filter(|l| l.starts_with("EDGE")).count(), 4);
        let back = PoseGraph::read_text(&buf[..]).unwrap();
        assert_eq!(back.nodes.len(), 4);
        for (a, b) in back.edges.iter().zip(&g.edges) {
            assert_eq!(a.information, b.information);
            assert!(a.measurement.between(&b.measurement).translation().norm() < 1e-12);
            assert!(a.measurement.between(&b.measurement).rotation_angle() < 1e-12);
            assert_eq!(a.kind, b.kind);
        }
        assert!(PoseGraph::read_text("NODE 0 1 2".as_bytes()).is_err());
    }

    #[test]
    fn rotation_angle_helper() {
        let a = Pose::from_axis_angle(&Vector3::z(), 0.3).rotation_matrix();
        let b = Pose::from_axis_angle(&Vector3::z(), 0.5).rotation_matrix();
        assert_relative_eq!(rotation_angle_between(&a, &b), 0.2, epsilon = 1e-12);
    }
}
