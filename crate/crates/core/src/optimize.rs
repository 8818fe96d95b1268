//! The outer optimization loop: alternating depth solves, IRLS reweighting
//! and explicit gradient filtering under a two-pass lambda schedule.
//!
//! Each iteration solves `argmin E_v + lambda * E_disc` for depth, then
//! recomputes the auxiliary weights from the jump magnitudes
//! (`w_e = min(1 / (D_e d)^2, 1)`) and rebuilds the edit field `g'` by
//! filtering the jumps: scale by the local change of tangentness
//! `s(e) = (nz' - nz'')^2 + tau`, keep only jumps whose scaled squared
//! magnitude is a local maximum along the edge axis, and gate them through a
//! steep sigmoid. Lambda cycles through `[soft, mean, hard, mean]`: the soft
//! pass lets the depth solve heal spurious jumps, the hard pass widens and
//! reinforces the surviving ones.

use serde::Serialize;

use crate::gradients::{edge_targets, CameraModel, EdgeWeights, GradientTargets, NormalMap};
use crate::graph::{average_to_depth_map, DepthSolution, EdgeId, PixelGraph, ProjectionMode};
use crate::grid::ScalarMap;
use crate::solver::{solve_cg, Assembler, SolveReport};
use crate::{Error, Result};

/// Magnitudes below this count as zero in `g'` sparsity statistics. Smooth
/// regions of a converged solution carry jump residue at the scale of the
/// inner solver tolerance; this floor sits an order above the default
/// `cg_tol` and many orders below any meaningful jump.
pub const GPRIME_NONZERO_EPS: f64 = 1e-6;

/// Hyperparameters of the iterative optimization and its inner solver.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Weight of the auxiliary energy in the healing pass.
    pub lambda_soft: f64,
    /// Weight of the auxiliary energy in the reinforcement pass.
    pub lambda_hard: f64,
    /// Total number of outer iterations.
    pub n_max: usize,
    /// Sigmoid steepness of the gradient filter.
    pub k: f64,
    /// Floor of the tangentness scale.
    pub tau: f64,
    /// Relative tolerance of the inner CG solve.
    pub cg_tol: f64,
    /// Iteration budget of the inner CG solve.
    pub cg_max_iter: usize,
    pub camera: CameraModel,
    /// Stop once the relative change of `E_v + lambda_c * E_disc` over a
    /// full lambda cycle falls below `early_stop_tol`. Off by default; the
    /// reference behaviour runs all `n_max` iterations.
    pub early_stop: bool,
    pub early_stop_tol: f64,
    /// Record a depth/g' snapshot every this many iterations.
    pub snapshot_every: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda_soft: 0.2,
            lambda_hard: 1.2,
            n_max: 5000,
            k: 1000.0,
            tau: 1e-2,
            cg_tol: crate::solver::DEFAULT_CG_TOL,
            cg_max_iter: crate::solver::DEFAULT_CG_MAX_ITER,
            camera: CameraModel::Orthographic,
            early_stop: false,
            early_stop_tol: 1e-9,
            snapshot_every: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.lambda_soft > 0.0 && self.lambda_soft <= self.lambda_hard) {
            return fail(format!(
                "need 0 < lambda_soft <= lambda_hard, got {} and {}",
                self.lambda_soft, self.lambda_hard
            ));
        }
        if !(self.k > 0.0) {
            return fail(format!("k must be positive, got {}", self.k));
        }
        if !(self.tau > 0.0) {
            return fail(format!("tau must be positive, got {}", self.tau));
        }
        if self.n_max < 4 {
            return fail(format!("n_max must be at least 4, got {}", self.n_max));
        }
        if !(self.cg_tol > 0.0) {
            return fail(format!("cg_tol must be positive, got {}", self.cg_tol));
        }
        if !(self.early_stop_tol > 0.0) {
            return fail(format!(
                "early_stop_tol must be positive, got {}",
                self.early_stop_tol
            ));
        }
        self.camera.validate()
    }

    pub fn lambda_c(&self) -> f64 {
        0.5 * (self.lambda_soft + self.lambda_hard)
    }

    /// The repeated lambda schedule `[soft, c, hard, c]`.
    pub fn lambda_cycle(&self) -> [f64; 4] {
        let c = self.lambda_c();
        [self.lambda_soft, c, self.lambda_hard, c]
    }
}

/// One outer iteration of the trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceStep {
    pub lambda: f64,
    pub e_v: f64,
    pub e_disc: f64,
    pub nonzero_gprime_fraction: f64,
    pub cg: SolveReport,
}

/// Depth/g' state captured at a snapshot iteration.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub iteration: usize,
    pub depth_map: ScalarMap,
    pub gprime: Vec<f64>,
}

/// Records of a full optimization run.
#[derive(Debug, Clone)]
pub struct OptimizeTrace {
    pub steps: Vec<TraceStep>,
    pub snapshots: Vec<Snapshot>,
    pub lambda_c: f64,
    pub early_stopped: bool,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub depth: DepthSolution,
    pub depth_map: ScalarMap,
    pub gprime: Vec<f64>,
    pub weights: EdgeWeights,
    pub trace: OptimizeTrace,
}

/// IRLS weights from the current jumps: `w_e = min(1 / (D_e d)^2, 1)`.
/// Small jumps keep full weight (and get suppressed toward `g' = 0`); large
/// jumps are released to grow.
pub fn reweight(graph: &PixelGraph, depth: &DepthSolution) -> EdgeWeights {
    let mut w = Vec::with_capacity(graph.aux_edges.len());
    for i in 0..graph.aux_edges.len() {
        let d = crate::graph::directional_derivative(graph, depth, EdgeId::Aux(i));
        let d2 = d * d;
        w.push(if d2 <= 1.0 { 1.0 } else { 1.0 / d2 });
    }
    EdgeWeights(w)
}

/// Local change of tangentness across an auxiliary edge:
/// `s(e) = (nz(p') - nz(p''))^2 + tau`, where `p'`, `p''` are the pixels of
/// the flanking quad edges and `nz` is the per-pixel effective z-component
/// normalized to the orthographic range.
pub fn tangentness_scale(graph: &PixelGraph, nz: &ScalarMap, aux: usize, tau: f64) -> f64 {
    let e = &graph.aux_edges[aux];
    let (x0, y0) = graph.pixel_position(graph.quad_edges[e.flanks[0]].pixel);
    let (x1, y1) = graph.pixel_position(graph.quad_edges[e.flanks[1]].pixel);
    let d = nz.at(x0, y0) - nz.at(x1, y1);
    d * d + tau
}

/// The sigmoid gate on local-maximumness: `1 / (1 + exp(-k L))` for
/// `L > 0`, exactly zero otherwise.
pub fn filter_gate(l: f64, k: f64) -> f64 {
    if l > 0.0 {
        1.0 / (1.0 + (-k * l).exp())
    } else {
        0.0
    }
}

/// Rebuilds the edit field: `g'(e) = f(e) * D_e d` with
/// `G(e) = s(e) * D_e d`, `L(e) = 2 G(e)^2 - G(e_a')^2 - G(e_a'')^2`
/// (missing neighbors contribute `G = 0`) and `f` the sigmoid gate on `L`.
pub fn filter_gradients(
    graph: &PixelGraph,
    depth: &DepthSolution,
    nz: &ScalarMap,
    k: f64,
    tau: f64,
) -> Vec<f64> {
    let n = graph.aux_edges.len();
    let mut jump = Vec::with_capacity(n);
    let mut scaled_sq = Vec::with_capacity(n);
    for i in 0..n {
        let d = crate::graph::directional_derivative(graph, depth, EdgeId::Aux(i));
        let g = tangentness_scale(graph, nz, i, tau) * d;
        jump.push(d);
        scaled_sq.push(g * g);
    }
    let mut gprime = Vec::with_capacity(n);
    for (i, e) in graph.aux_edges.iter().enumerate() {
        let neighbor_sq = |slot: Option<usize>| slot.map_or(0.0, |j| scaled_sq[j]);
        let l = 2.0 * scaled_sq[i] - neighbor_sq(e.neighbors[0]) - neighbor_sq(e.neighbors[1]);
        gprime.push(filter_gate(l, k) * jump[i]);
    }
    gprime
}

/// Current energies: `E_v` over quad edges and `E_disc` (without the lambda
/// factor) over auxiliary edges.
pub fn energies(
    graph: &PixelGraph,
    targets: &GradientTargets,
    weights: &EdgeWeights,
    depth: &DepthSolution,
) -> (f64, f64) {
    let mut e_v = 0.0;
    for (e, t) in graph.quad_edges.iter().zip(&targets.quad) {
        let d = depth.values[e.head] - depth.values[e.tail];
        let r = t.nz * d - t.numerator;
        e_v += r * r;
    }
    let mut e_disc = 0.0;
    for (i, e) in graph.aux_edges.iter().enumerate() {
        let d = depth.values[e.head] - depth.values[e.tail];
        let r = targets.nz_aux * (d - targets.gprime[i]);
        e_disc += weights.0[i] * r * r;
    }
    (e_v, e_disc)
}

pub fn nonzero_fraction(gprime: &[f64]) -> f64 {
    if gprime.is_empty() {
        return 0.0;
    }
    let nonzero = gprime.iter().filter(|g| g.abs() > GPRIME_NONZERO_EPS).count();
    nonzero as f64 / gprime.len() as f64
}

/// Runs the full iterative optimization on a normal map.
///
/// Starts from `g' = 0`, `w = 1` and cycles lambda through
/// `[soft, c, hard, c]`; every step solves for depth (warm-started from the
/// previous step), reweights, and refilters, until `n_max` steps have run or
/// the optional early stop triggers at a cycle boundary. In perspective mode
/// the loop runs on log-depth with `nz_aux = f` and the returned per-pixel
/// map is exponentiated.
pub fn optimize(normals: &NormalMap, config: &SolverConfig) -> Result<OptimizeResult> {
    config.validate()?;
    let graph = PixelGraph::build(normals.width, normals.height, &normals.mask)?;
    optimize_on_graph(normals, config, &graph)
}

/// As [`optimize`], reusing a prebuilt graph.
pub fn optimize_on_graph(
    normals: &NormalMap,
    config: &SolverConfig,
    graph: &PixelGraph,
) -> Result<OptimizeResult> {
    config.validate()?;
    let mut targets = edge_targets(normals, &config.camera, graph)?;
    let nz_normalized = normalized_nz_map(&targets);
    let cycle = config.lambda_cycle();
    let lambda_c = config.lambda_c();
    let assembler = Assembler::new(graph);

    let mut weights = EdgeWeights::ones(graph.aux_edges.len());
    let mut depth: Option<DepthSolution> = None;
    let mut steps = Vec::new();
    let mut snapshots = Vec::new();
    let mut early_stopped = false;
    let mut last_cycle_score: Option<f64> = None;
    // Energy of the zero solution; the scale against which "the energy has
    // reached the numerical floor" is judged.
    let data_energy: f64 = 1.0 + targets.quad.iter().map(|t| t.numerator * t.numerator).sum::<f64>();

    for n in 0..config.n_max {
        let lambda = cycle[n % 4];
        let system = assembler.assemble(graph, &targets, &weights, lambda);
        let (solution, report) =
            solve_cg(&system, depth.as_ref(), config.cg_tol, config.cg_max_iter)?;
        let (e_v, e_disc) = energies(graph, &targets, &weights, &solution);

        weights = reweight(graph, &solution);
        targets.gprime = filter_gradients(graph, &solution, &nz_normalized, config.k, config.tau);
        steps.push(TraceStep {
            lambda,
            e_v,
            e_disc,
            nonzero_gprime_fraction: nonzero_fraction(&targets.gprime),
            cg: report,
        });
        if let Some(every) = config.snapshot_every {
            if (n + 1) % every == 0 {
                snapshots.push(Snapshot {
                    iteration: n + 1,
                    depth_map: average_to_depth_map(graph, &solution),
                    gprime: targets.gprime.clone(),
                });
            }
        }
        depth = Some(solution);

        // Early stop is evaluated on full cycles only, so a stopped trace
        // still carries whole [soft, c, hard, c] blocks. Scores twelve
        // orders below the data energy count as converged outright:
        // cycle-to-cycle ratios at the solver's noise floor are meaningless.
        if config.early_stop && (n + 1) % 4 == 0 {
            let score = e_v + lambda_c * e_disc;
            let floored = score <= 1e-12 * data_energy;
            let plateaued = last_cycle_score.is_some_and(|prev| {
                (score - prev).abs() / prev.abs().max(f64::MIN_POSITIVE) < config.early_stop_tol
            });
            if floored || plateaued {
                early_stopped = true;
                break;
            }
            last_cycle_score = Some(score);
        }
    }

    let depth = depth.expect("n_max >= 4 guarantees at least one solve");
    let depth_map = average_to_depth_map(graph, &depth);
    Ok(OptimizeResult {
        depth,
        depth_map,
        gprime: targets.gprime.clone(),
        weights,
        trace: OptimizeTrace {
            steps,
            snapshots,
            lambda_c,
            early_stopped,
        },
    })
}

/// Per-pixel effective nz normalized to the orthographic range (divided by
/// `f` in perspective mode) for use in the tangentness scale.
pub fn normalized_nz_map(targets: &GradientTargets) -> ScalarMap {
    let mut map = targets.nz_eff.clone();
    if targets.mode == ProjectionMode::Perspective {
        for v in &mut map.data {
            *v /= targets.nz_aux;
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ProjectionMode;

    fn line_graph(n: usize) -> PixelGraph {
        PixelGraph::build(n, 1, &vec![true; n]).unwrap()
    }

    fn depth_on(graph: &PixelGraph, values: Vec<f64>) -> DepthSolution {
        assert_eq!(values.len(), graph.vertex_count());
        DepthSolution {
            values,
            mode: ProjectionMode::Orthographic,
        }
    }

    #[test]
    fn reweight_examples() {
        // Jumps 0, 2 and 0.5 on the two bridges of consecutive pairs.
        let graph = line_graph(2);
        let mut values = vec![0.0; graph.vertex_count()];
        for v in 4..8 {
            values[v] = 2.0;
        }
        let w = reweight(&graph, &depth_on(&graph, values));
        assert_eq!(w.0, vec![0.25, 0.25]);

        let w = reweight(&graph, &depth_on(&graph, vec![0.0; 8]));
        assert_eq!(w.0, vec![1.0, 1.0]);

        let mut values = vec![0.0; 8];
        for v in 4..8 {
            values[v] = 0.5;
        }
        let w = reweight(&graph, &depth_on(&graph, values));
        assert_eq!(w.0, vec![1.0, 1.0]);
    }

    #[test]
    fn tangentness_examples() {
        let graph = line_graph(2);
        let tau = 1e-2;
        let nz = ScalarMap {
            width: 2,
            height: 1,
            data: vec![1.0, 1.0],
        };
        assert!((tangentness_scale(&graph, &nz, 0, tau) - 0.01).abs() < 1e-15);

        let nz = ScalarMap {
            width: 2,
            height: 1,
            data: vec![1.0, 0.2],
        };
        assert!((tangentness_scale(&graph, &nz, 0, tau) - 0.65).abs() < 1e-12);

        let nz = ScalarMap {
            width: 2,
            height: 1,
            data: vec![0.3, 0.3],
        };
        assert_eq!(tangentness_scale(&graph, &nz, 0, tau), tau);
    }

    #[test]
    fn gate_examples() {
        // Scaled squared magnitudes (4, 1, 1): L = 2*4 - 1 - 1 = 6, and the
        // steep sigmoid saturates.
        let l = 2.0 * 4.0 - 1.0 - 1.0;
        assert_eq!(l, 6.0);
        assert!(filter_gate(l, 1000.0) > 1.0 - 1e-12);
        assert_eq!(filter_gate(0.0, 1000.0), 0.0);
        assert_eq!(filter_gate(-3.0, 1000.0), 0.0);
        assert!((filter_gate(1e-9, 1000.0) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn flat_depth_filters_to_zero() {
        let graph = line_graph(4);
        let nz = ScalarMap::filled(4, 1, 1.0);
        let depth = depth_on(&graph, vec![1.5; graph.vertex_count()]);
        let g = filter_gradients(&graph, &depth, &nz, 1000.0, 1e-2);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn isolated_jump_survives_the_filter() {
        // Three pixel pairs; only the middle pair carries a jump.
        let graph = line_graph(4);
        let mut values: Vec<f64> = Vec::new();
        for p in 0..4 {
            let v = if p >= 2 { 5.0 } else { 0.0 };
            values.extend_from_slice(&[v; 4]);
        }
        let depth = depth_on(&graph, values);
        let nz = ScalarMap::filled(4, 1, 1.0);
        let (k, tau) = (1000.0, 1e-2);
        let g = filter_gradients(&graph, &depth, &nz, k, tau);
        // G = tau * 5 on the jump edges, neighbors are zero: L = 2 G^2.
        let l = 2.0 * (tau * 5.0) * (tau * 5.0);
        let expect = 5.0 / (1.0 + (-k * l).exp());
        for (i, e) in graph.aux_edges.iter().enumerate() {
            let (p, q) = e.pixels;
            if (p, q) == (1, 2) {
                assert!((g[i] - expect).abs() < 1e-12, "jump edge got {}", g[i]);
            } else {
                assert_eq!(g[i], 0.0, "edge {i} between {p},{q}");
            }
        }
    }

    #[test]
    fn filter_never_exceeds_the_jump() {
        let graph = line_graph(5);
        let values: Vec<f64> = (0..graph.vertex_count())
            .map(|v| ((v * 2654435761) % 97) as f64 / 9.7 - 5.0)
            .collect();
        let depth = depth_on(&graph, values);
        let nz = ScalarMap::filled(5, 1, 0.8);
        let g = filter_gradients(&graph, &depth, &nz, 1000.0, 1e-2);
        for (i, gv) in g.iter().enumerate() {
            let d = crate::graph::directional_derivative(&graph, &depth, EdgeId::Aux(i));
            assert!(gv.abs() <= d.abs() + 1e-15);
            assert!(gv.signum() == d.signum() || *gv == 0.0);
        }
    }

    #[test]
    fn lambda_cycle_from_defaults() {
        let config = SolverConfig::default();
        let c = config.lambda_c();
        assert!((c - 0.7).abs() < 1e-15);
        let cycle = config.lambda_cycle();
        assert_eq!(cycle[0], 0.2);
        assert_eq!(cycle[2], 1.2);
        assert_eq!(cycle[1], c);
        assert_eq!(cycle[3], c);
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut c = SolverConfig::default();
        c.lambda_soft = 0.0;
        assert!(c.validate().is_err());

        let mut c = SolverConfig::default();
        c.lambda_soft = 2.0; // above lambda_hard
        assert!(c.validate().is_err());

        let mut c = SolverConfig::default();
        c.n_max = 3;
        assert!(c.validate().is_err());

        let mut c = SolverConfig::default();
        c.tau = -1.0;
        assert!(c.validate().is_err());

        let mut c = SolverConfig::default();
        c.camera = CameraModel::Perspective {
            focal: 0.0,
            center: (0.0, 0.0),
        };
        assert!(c.validate().is_err());
    }
}
