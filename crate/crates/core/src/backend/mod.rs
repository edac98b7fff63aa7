//! Submap back-end: adjacent and loop edges between submaps, pose-graph
//! optimization and redistribution of the corrections onto member
//! frames.
//!
//! The front-end cuts [`Submap`] snapshots with a [`SubmapBuilder`] and
//! hands them to a [`Backend`], either directly or through the worker
//! thread started by [`Backend::spawn`].

pub mod graph;
pub mod loops;
pub mod submap;

use std::sync::mpsc::{channel, Sender};
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;

use nalgebra::{Matrix6, Vector6};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::types::Pose;

pub use graph::{
    adjoint, components, distribute_inner, edge_residual, objective, optimize_graph, psd_inverse, EdgeKind, PgoOptions,
    PgoReport, PoseGraph, PoseGraphEdge,
};
pub use loops::{
    coarse_register, find_loop_candidates, match_descriptors, match_ncc, rigid_fit, verify_and_refine, CoarseResult,
    RansacParams, VerifyParams,
};
pub use submap::{Member, Submap, SubmapBuilder, SubmapTrigger};

/// Outcome of one loop-closure attempt.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopAttempt {
    pub from: usize,
    pub to: usize,
    /// RANSAC inlier count, when coarse registration succeeded.
    pub coarse_inliers: Option<usize>,
    /// True when the accepted edge was refined from the odometry prior.
    pub used_prior: bool,
    pub accepted: bool,
    pub sigma: Option<f64>,
    pub overlap: Option<f64>,
    pub note: String,
}

/// Corrected per-frame poses, replaced wholesale after every update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorrectedTrajectory {
    pub version: u64,
    pub poses: Vec<(u64, Pose)>,
}

/// Covariance assumed for a member frame without a registration result.
const UNTRACKED_VARIANCE: [f64; 6] = [1.0, 1.0, 1.0, 0.01, 0.01, 0.01];
/// Added to every frame covariance so degenerate scan-to-map directions
/// do not become infinitely certain in the chained edge.
const VARIANCE_FLOOR: f64 = 1e-8;

/// Owns the graph; consumes submaps in id order.
#[derive(Debug)]
pub struct Backend {
    cfg: RunConfig,
    submaps: Vec<Submap>,
    graph: PoseGraph,
    loops: Vec<LoopAttempt>,
    /// Submaps added since the last optimization.
    unoptimized: usize,
    optimizations: usize,
    version: u64,
}

impl Backend {
    pub fn new(cfg: RunConfig) -> Self {
        Backend {
            cfg,
            submaps: Vec::new(),
            graph: PoseGraph::default(),
            loops: Vec::new(),
            unoptimized: 0,
            optimizations: 0,
            version: 0,
        }
    }

    pub fn submaps(&self) -> &[Submap] {
        &self.submaps
    }

    pub fn graph(&self) -> &PoseGraph {
        &self.graph
    }

    pub fn loops(&self) -> &[LoopAttempt] {
        &self.loops
    }

    pub fn optimizations(&self) -> usize {
        self.optimizations
    }

    /// Adds a submap node with its adjacent edge, tries loop closures
    /// against earlier submaps and re-optimizes when any is accepted.
    pub fn add_submap(&mut self, s: Submap) -> Result<()> {
        let id = s.id;
        if id != self.submaps.len() {
            return Err(Error::InvalidArgument(format!(
                "submap {id} arrived, expected {}",
                self.submaps.len()
            )));
        }
        if id == 0 {
            self.graph.nodes.push(s.reference_pose);
            self.graph.fixed = 0;
            self.submaps.push(s);
            self.version += 1;
            return Ok(());
        }

        let prev = &self.submaps[id - 1];
        let z = prev.reference_pose.between(&s.reference_pose);
        let info = chain_information(&prev.reference_pose, &s);
        let node = self.graph.nodes[id - 1].compose(&z);
        self.graph.nodes.push(node);
        self.graph
            .edges
            .push(PoseGraphEdge::new(id - 1, id, z, info, EdgeKind::Adjacent)?);
        self.submaps.push(s);

        let b = &self.cfg.backend;
        let radius = b.loop_radius + b.loop_radius_growth * self.unoptimized as f64;
        let mut added = 0;
        for c in find_loop_candidates(&self.graph.nodes, id, radius) {
            let attempt = self.try_loop(c, id);
            log::debug!("loop {} -> {}: {:?}", c, id, attempt.1);
            if let Some(edge) = attempt.0 {
                self.graph.edges.push(edge);
                added += 1;
            }
            self.loops.push(attempt.1);
        }

        if added > 0 {
            let report = optimize_graph(&self.graph, &PgoOptions::from_config(&self.cfg.backend))?;
            log::info!(
                "pose graph: {} nodes, {} edges, cost {:.3e} -> {:.3e} in {} iterations",
                self.graph.nodes.len(),
                self.graph.edges.len(),
                report.initial_cost,
                report.final_cost,
                report.iterations
            );
            self.graph.nodes = report.poses;
            self.unoptimized = 0;
            self.optimizations += 1;
        } else {
            self.unoptimized += 1;
        }
        self.version += 1;
        Ok(())
    }

    fn try_loop(&self, target_id: usize, source_id: usize) -> (Option<PoseGraphEdge>, LoopAttempt) {
        let (target, source) = (&self.submaps[target_id], &self.submaps[source_id]);
        let b = &self.cfg.backend;
        let mut attempt = LoopAttempt {
            from: target_id,
            to: source_id,
            coarse_inliers: None,
            used_prior: false,
            accepted: false,
            sigma: None,
            overlap: None,
            note: String::new(),
        };
        let prior = self.graph.nodes[target_id].between(&self.graph.nodes[source_id]);

        let coarse = match_ncc(target, source, b.ncc_cos_min).and_then(|pairs| {
            let (tv, sv) = (target.vertex_positions(), source.vertex_positions());
            let src: Vec<_> = pairs.iter().map(|&(_, j, _)| sv[j]).collect();
            let dst: Vec<_> = pairs.iter().map(|&(i, _, _)| tv[i]).collect();
            coarse_register(&src, &dst, &RansacParams::from_config(&self.cfg))
        });
        let mut guesses = Vec::new();
        match coarse {
            Ok(c) => {
                attempt.coarse_inliers = Some(c.inliers.len());
                guesses.push((c.transform, false));
            }
            Err(e) => attempt.note = format!("coarse: {e}"),
        }
        if b.odometry_prior_fallback {
            guesses.push((prior, true));
        }

        let params = VerifyParams::from_config(&self.cfg);
        let path: f64 = self.submaps[target_id + 1..=source_id]
            .iter()
            .map(|s| s.accumulated_translation)
            .sum();
        let gate_t = b.loop_gate_translation + b.loop_gate_drift * path;
        let gate_r = b.loop_gate_rotation_deg.to_radians();
        for (guess, from_prior) in guesses {
            let verified = verify_and_refine(target, source, &guess, &params, EdgeKind::Loop).and_then(|(edge, r)| {
                // Symmetric scenes can pass verification at an aliased pose.
                let d = prior.between(&edge.measurement);
                if d.translation().norm() > gate_t || d.rotation_angle() > gate_r {
                    return Err(Error::RegistrationFailed(format!(
                        "{:.2} m / {:.1}° from the current estimate",
                        d.translation().norm(),
                        d.rotation_angle().to_degrees()
                    )));
                }
                Ok((edge, r))
            });
            match verified {
                Ok((edge, r)) => {
                    attempt.accepted = true;
                    attempt.used_prior = from_prior;
                    attempt.sigma = Some(r.sigma);
                    attempt.overlap = Some(r.overlap);
                    return (Some(edge), attempt);
                }
                Err(e) => {
                    if !attempt.note.is_empty() {
                        attempt.note.push_str("; ");
                    }
                    attempt.note.push_str(&format!("{}: {e}", if from_prior { "prior" } else { "refine" }));
                }
            }
        }
        (None, attempt)
    }

    /// Every member frame's pose under the current node estimates.
    pub fn corrected(&self) -> CorrectedTrajectory {
        let poses = self
            .submaps
            .iter()
            .zip(&self.graph.nodes)
            .flat_map(|(s, node)| distribute_inner(node, &s.relative_members()))
            .collect();
        CorrectedTrajectory {
            version: self.version,
            poses,
        }
    }

    /// Runs the back-end on a worker thread fed through a queue.
    pub fn spawn(self) -> BackendHandle {
        let (tx, rx) = channel::<Submap>();
        let published = Arc::new(RwLock::new(Arc::new(self.corrected())));
        let out = Arc::clone(&published);
        let worker = std::thread::spawn(move || {
            let mut backend = self;
            for s in rx {
                backend.add_submap(s)?;
                let snap = Arc::new(backend.corrected());
                *out.write().expect("trajectory lock poisoned") = snap;
            }
            Ok(backend)
        });
        BackendHandle {
            tx: Some(tx),
            worker: Some(worker),
            published,
        }
    }
}

/// Information of the odometry chain between two consecutive submap
/// references: member-frame covariances summed in the earlier reference
/// frame, then inverted.
fn chain_information(prev_reference: &Pose, s: &Submap) -> Matrix6<f64> {
    let ad = adjoint(&prev_reference.inverse());
    let untracked = Matrix6::from_diagonal(&Vector6::from(UNTRACKED_VARIANCE));
    let floor = Matrix6::identity() * VARIANCE_FLOOR;
    let cov: Matrix6<f64> = s
        .members
        .iter()
        .map(|m| {
            let c = m.information.as_ref().map_or(untracked, psd_inverse) + floor;
            ad * c * ad.transpose()
        })
        .sum();
    let info = psd_inverse(&cov);
    (info + info.transpose()) * 0.5
}

/// Handle to a back-end worker.
pub struct BackendHandle {
    tx: Option<Sender<Submap>>,
    worker: Option<JoinHandle<Result<Backend>>>,
    published: Arc<RwLock<Arc<CorrectedTrajectory>>>,
}

impl BackendHandle {
    pub fn submit(&self, s: Submap) -> Result<()> {
        self.tx
            .as_ref()
            .and_then(|tx| tx.send(s).ok())
            .ok_or_else(|| Error::InvalidArgument("back-end worker has stopped".into()))
    }

    /// Latest published corrected trajectory.
    pub fn latest(&self) -> Arc<CorrectedTrajectory> {
        Arc::clone(&self.published.read().expect("trajectory lock poisoned"))
    }

    /// Closes the queue and waits for the worker to drain it.
    pub fn finish(mut self) -> Result<Backend> {
        drop(self.tx.take());
        self.worker
            .take()
            .expect("worker joined twice")
            .join()
            .map_err(|_| Error::InvalidArgument("back-end worker panicked".into()))?
    }
}
