//! Weighted least-squares assembly and the conjugate-gradient depth solve.
//!
//! The stacked residual vector contains one row per quad edge,
//! `r_v(e) = nz_eff(e) * D_e d - numerator(e)`, and one row per auxiliary
//! edge, `r_a(e) = sqrt(lambda * w_e) * nz_aux * (D_e d - g'(e))`. The
//! normal equations `AᵀWA d = AᵀW b` are assembled directly in CSR form and
//! solved with Jacobi-preconditioned conjugate gradients. The constant
//! nullspace (one offset per connected mask component) is pinned by
//! projecting out the per-component mean after each solve.

use rayon::prelude::*;

use crate::error::Error;
use crate::gradients::{CameraModel, EdgeWeights, GradientTargets, NormalMap};
use crate::graph::{DepthSolution, PixelGraph};
use crate::Result;

/// Default relative tolerance of the inner CG solve.
pub const DEFAULT_CG_TOL: f64 = 1e-7;
/// Default iteration budget of the inner CG solve.
pub const DEFAULT_CG_MAX_ITER: usize = 3000;

/// Rows below this count are cheaper to multiply on one thread.
const PAR_ROW_THRESHOLD: usize = 8192;

/// Symmetric sparse matrix in CSR form. Column indices are `u32`; vertex
/// counts stay far below that limit for any realistic normal map.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `out = M x`. Row-parallel and deterministic: each output element is a
    /// fixed-order dot product over one row.
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        let row = |r: usize| -> f64 {
            let lo = self.row_ptr[r];
            let hi = self.row_ptr[r + 1];
            let mut acc = 0.0;
            for (v, c) in self.values[lo..hi].iter().zip(&self.col_idx[lo..hi]) {
                acc += v * x[*c as usize];
            }
            acc
        };
        if self.n >= PAR_ROW_THRESHOLD && rayon::current_num_threads() > 1 {
            out.par_iter_mut().enumerate().for_each(|(r, o)| *o = row(r));
        } else {
            for (r, o) in out.iter_mut().enumerate() {
                *o = row(r);
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] as usize == r {
                    d[r] = self.values[k];
                }
            }
        }
        d
    }

    /// Half-stored view for the sequential symmetric product: diagonal plus
    /// strictly-upper entries.
    fn to_symmetric_half(&self) -> SymmetricHalf {
        let mut diag = vec![0.0; self.n];
        let mut rows = Vec::with_capacity(self.n + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        rows.push(0);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k] as usize;
                if c == r {
                    diag[r] = self.values[k];
                } else if c > r {
                    cols.push(self.col_idx[k]);
                    values.push(self.values[k]);
                }
            }
            rows.push(cols.len());
        }
        SymmetricHalf {
            diag,
            rows,
            cols,
            values,
        }
    }
}

/// Diagonal plus strictly-upper triangle of a symmetric matrix, multiplied
/// sequentially with a fixed traversal order (deterministic, and half the
/// memory traffic of the full CSR product on one core).
struct SymmetricHalf {
    diag: Vec<f64>,
    rows: Vec<usize>,
    cols: Vec<u32>,
    values: Vec<f64>,
}

impl SymmetricHalf {
    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for (o, (d, xi)) in out.iter_mut().zip(self.diag.iter().zip(x)) {
            *o = d * xi;
        }
        for r in 0..self.diag.len() {
            let xr = x[r];
            let mut acc = 0.0;
            for k in self.rows[r]..self.rows[r + 1] {
                let c = self.cols[k] as usize;
                let v = self.values[k];
                acc += v * x[c];
                out[c] += v * xr;
            }
            out[r] += acc;
        }
    }
}

/// Normal equations of one depth solve.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Connected mask component per vertex, for nullspace pinning.
    component: Vec<usize>,
    n_components: usize,
    mode: crate::graph::ProjectionMode,
}

impl LinearSystem {
    pub fn dimension(&self) -> usize {
        self.matrix.n
    }

    /// Subtracts the mean per mask component in place.
    pub fn pin_mean(&self, values: &mut [f64]) {
        let mut sum = vec![0.0; self.n_components];
        let mut count = vec![0usize; self.n_components];
        for (v, &c) in values.iter().zip(&self.component) {
            sum[c] += v;
            count[c] += 1;
        }
        for (v, &c) in values.iter_mut().zip(&self.component) {
            *v -= sum[c] / count[c] as f64;
        }
    }
}

/// Convergence report of a CG solve.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Assembles the normal equations `AᵀWA d = AᵀW b` for the energy
/// `E_v + lambda * E_disc` over the graph.
pub fn assemble(
    graph: &PixelGraph,
    targets: &GradientTargets,
    weights: &EdgeWeights,
    lambda: f64,
) -> LinearSystem {
    Assembler::new(graph).assemble(graph, targets, weights, lambda)
}

/// Reusable assembly: the sparsity pattern of `AᵀWA` depends only on the
/// graph, so the outer loop builds it once and refills values per iteration.
pub struct Assembler {
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    /// Value slots for each edge's four stamp entries
    /// `(head,head), (tail,tail), (head,tail), (tail,head)`; quad edges
    /// first, auxiliary edges after.
    slots: Vec<[usize; 4]>,
    component: Vec<usize>,
    n_components: usize,
}

impl Assembler {
    pub fn new(graph: &PixelGraph) -> Self {
        let n = graph.vertex_count();
        assert!(n <= u32::MAX as usize);
        let mut columns: Vec<Vec<u32>> = (0..n).map(|v| vec![v as u32]).collect();
        let ends = |tail: usize, head: usize| (tail, head);
        let all_edges: Vec<(usize, usize)> = graph
            .quad_edges
            .iter()
            .map(|e| ends(e.tail, e.head))
            .chain(graph.aux_edges.iter().map(|e| ends(e.tail, e.head)))
            .collect();
        for &(tail, head) in &all_edges {
            columns[tail].push(head as u32);
            columns[head].push(tail as u32);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx: Vec<u32> = Vec::new();
        row_ptr.push(0);
        for cols in &mut columns {
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend_from_slice(cols);
            row_ptr.push(col_idx.len());
        }
        let slot_of = |row: usize, col: usize| -> usize {
            let range = row_ptr[row]..row_ptr[row + 1];
            range.start
                + col_idx[range]
                    .binary_search(&(col as u32))
                    .expect("pattern covers edge")
        };
        let slots = all_edges
            .iter()
            .map(|&(tail, head)| {
                [
                    slot_of(head, head),
                    slot_of(tail, tail),
                    slot_of(head, tail),
                    slot_of(tail, head),
                ]
            })
            .collect();
        Self {
            row_ptr,
            col_idx,
            slots,
            component: (0..n).map(|v| graph.vertex_component(v)).collect(),
            n_components: graph.n_components(),
        }
    }

    pub fn assemble(
        &self,
        graph: &PixelGraph,
        targets: &GradientTargets,
        weights: &EdgeWeights,
        lambda: f64,
    ) -> LinearSystem {
        assert_eq!(weights.0.len(), graph.aux_edges.len(), "weights sized to aux edges");
        assert_eq!(targets.gprime.len(), graph.aux_edges.len(), "g' sized to aux edges");
        let n = graph.vertex_count();
        let mut values = vec![0.0; self.col_idx.len()];
        let mut rhs = vec![0.0; n];

        // Residual row a*(d[head] - d[tail]) - beta with row weight w
        // contributes w*a^2 to the head/tail diagonal, -w*a^2 to the
        // off-diagonals, and +-w*a*beta to the rhs.
        let mut stamp = |slot: &[usize; 4], tail: usize, head: usize, a: f64, beta: f64, w: f64| {
            let waa = w * a * a;
            values[slot[0]] += waa;
            values[slot[1]] += waa;
            values[slot[2]] -= waa;
            values[slot[3]] -= waa;
            let wab = w * a * beta;
            rhs[head] += wab;
            rhs[tail] -= wab;
        };

        for ((e, t), slot) in graph.quad_edges.iter().zip(&targets.quad).zip(&self.slots) {
            stamp(slot, e.tail, e.head, t.nz, t.numerator, 1.0);
        }
        let aux_slots = &self.slots[graph.quad_edges.len()..];
        for ((i, e), slot) in graph.aux_edges.iter().enumerate().zip(aux_slots) {
            let a = targets.nz_aux;
            stamp(slot, e.tail, e.head, a, a * targets.gprime[i], lambda * weights.0[i]);
        }

        LinearSystem {
            matrix: CsrMatrix {
                n,
                row_ptr: self.row_ptr.clone(),
                col_idx: self.col_idx.clone(),
                values,
            },
            rhs,
            component: self.component.clone(),
            n_components: self.n_components,
            mode: targets.mode,
        }
    }
}

/// Solves the assembled system with Jacobi-preconditioned CG.
///
/// Converges when `|A x - b| / |b| <= tol` (absolute when `b = 0`); the
/// returned solution has its per-component mean projected out. Non-finite
/// values abort with a divergent-solve error naming the iteration.
pub fn solve_cg(
    system: &LinearSystem,
    warm_start: Option<&DepthSolution>,
    tol: f64,
    max_iter: usize,
) -> Result<(DepthSolution, SolveReport)> {
    solve_cg_observed(system, warm_start, tol, max_iter, |_, _| ())
}

/// As [`solve_cg`], invoking `observer(iteration, current_x)` after every
/// accepted CG step. Used by tests that track the quadratic objective.
pub fn solve_cg_observed(
    system: &LinearSystem,
    warm_start: Option<&DepthSolution>,
    tol: f64,
    max_iter: usize,
    mut observer: impl FnMut(usize, &[f64]),
) -> Result<(DepthSolution, SolveReport)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("cg tolerance must be positive, got {tol}")));
    }
    let m = &system.matrix;
    let n = m.n;
    let mut x = match warm_start {
        Some(w) => {
            if w.values.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "warm start has {} values for a system of dimension {n}",
                    w.values.len()
                )));
            }
            w.values.clone()
        }
        None => vec![0.0; n],
    };

    let inv_diag: Vec<f64> = m
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    // On a single core the half-stored symmetric product moves half the
    // memory; with threads available the row-parallel full product wins.
    let parallel = m.n >= PAR_ROW_THRESHOLD && rayon::current_num_threads() > 1;
    let half = if parallel { None } else { Some(m.to_symmetric_half()) };
    let mv = |x: &[f64], out: &mut [f64]| match &half {
        Some(h) => h.matvec(x, out),
        None => m.matvec(x, out),
    };

    let b_norm = norm(&system.rhs);
    let threshold = if b_norm > 0.0 { tol * b_norm } else { tol };
    let rel = |r_norm: f64| if b_norm > 0.0 { r_norm / b_norm } else { r_norm };

    let mut r = vec![0.0; n];
    mv(&x, &mut r);
    for i in 0..n {
        r[i] = system.rhs[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];

    let mut iterations = 0;
    let mut r_norm = norm(&r);
    while r_norm > threshold && iterations < max_iter {
        mv(&p, &mut q);
        let pq = dot(&p, &q);
        let alpha = rz / pq;
        if !alpha.is_finite() {
            return Err(Error::DivergentSolve { iteration: iterations });
        }
        let mut r_sq = 0.0;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
            r_sq += r[i] * r[i];
        }
        iterations += 1;
        observer(iterations, &x);
        r_norm = r_sq.sqrt();
        if !r_norm.is_finite() {
            return Err(Error::DivergentSolve { iteration: iterations });
        }
        if r_norm <= threshold {
            break;
        }
        let mut rz_next = 0.0;
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
            rz_next += r[i] * z[i];
        }
        let beta = rz_next / rz;
        if !beta.is_finite() {
            return Err(Error::DivergentSolve { iteration: iterations });
        }
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_next;
    }

    system.pin_mean(&mut x);
    let report = SolveReport {
        iterations,
        relative_residual: rel(r_norm),
        converged: r_norm <= threshold,
    };
    Ok((
        DepthSolution {
            values: x,
            mode: system.mode,
        },
        report,
    ))
}

/// The ordinary least-squares reference solve: `w = 1`, `g' = 0`,
/// `lambda = 1`. This is the classical smooth integration that spreads any
/// hidden jump over the whole domain.
pub fn poisson_baseline(
    normals: &NormalMap,
    camera: &CameraModel,
    graph: &PixelGraph,
) -> Result<(DepthSolution, SolveReport)> {
    let targets = crate::gradients::edge_targets(normals, camera, graph)?;
    let weights = EdgeWeights::ones(graph.aux_edges.len());
    let system = assemble(graph, &targets, &weights, 1.0);
    solve_cg(&system, None, DEFAULT_CG_TOL, DEFAULT_CG_MAX_ITER)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Fixed-order reduction keeps repeated runs bit-identical.
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradients::edge_targets;
    use crate::graph::PixelGraph;

    fn flat_normals(w: usize, h: usize) -> NormalMap {
        NormalMap::from_raw(
            w,
            h,
            vec![0.0; w * h],
            vec![0.0; w * h],
            vec![1.0; w * h],
            vec![true; w * h],
        )
        .unwrap()
    }

    fn dense(system: &LinearSystem) -> Vec<Vec<f64>> {
        let n = system.dimension();
        let mut out = vec![vec![0.0; n]; n];
        let m = &system.matrix;
        for r in 0..n {
            for k in m.row_ptr[r]..m.row_ptr[r + 1] {
                out[r][m.col_idx[k] as usize] = m.values[k];
            }
        }
        out
    }

    #[test]
    fn single_quad_system_has_rank_three() {
        let normals = flat_normals(1, 1);
        let graph = PixelGraph::build(1, 1, &normals.mask).unwrap();
        let targets = edge_targets(&normals, &CameraModel::Orthographic, &graph).unwrap();
        let system = assemble(&graph, &targets, &EdgeWeights::ones(0), 1.0);
        let mut a = dense(&system);
        // Gaussian elimination with partial pivoting; count nonzero pivots.
        let n = 4;
        let mut rank = 0;
        for col in 0..n {
            let pivot = (rank..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()));
            let Some(pivot) = pivot else { break };
            if a[pivot][col].abs() < 1e-12 {
                continue;
            }
            a.swap(rank, pivot);
            for i in rank + 1..n {
                let f = a[i][col] / a[rank][col];
                for j in col..n {
                    a[i][j] -= f * a[rank][j];
                }
            }
            rank += 1;
        }
        assert_eq!(rank, 3); // vertices - 1
    }

    #[test]
    fn lambda_zero_decouples_pixels() {
        let normals = flat_normals(2, 1);
        let graph = PixelGraph::build(2, 1, &normals.mask).unwrap();
        let targets = edge_targets(&normals, &CameraModel::Orthographic, &graph).unwrap();
        let system = assemble(&graph, &targets, &EdgeWeights::ones(2), 0.0);
        let a = dense(&system);
        for r in 0..4 {
            for c in 4..8 {
                assert_eq!(a[r][c], 0.0);
                assert_eq!(a[c][r], 0.0);
            }
        }
    }

    #[test]
    fn bridge_edit_moves_right_quad_up_by_five() {
        let normals = flat_normals(2, 1);
        let graph = PixelGraph::build(2, 1, &normals.mask).unwrap();
        let mut targets = edge_targets(&normals, &CameraModel::Orthographic, &graph).unwrap();
        targets.gprime = vec![5.0, 5.0];
        let system = assemble(&graph, &targets, &EdgeWeights::ones(2), 1.0);
        let (sol, report) = solve_cg(&system, None, 1e-12, 500).unwrap();
        assert!(report.converged);
        // Flat normals and a consistent edit: exact jump of 5 between quads.
        for left in 0..4 {
            for right in 4..8 {
                let jump = sol.values[right] - sol.values[left];
                assert!((jump - 5.0).abs() < 1e-9, "jump {jump}");
            }
        }
    }

    #[test]
    fn warm_start_offset_is_gauged_away() {
        let normals = flat_normals(3, 3);
        let graph = PixelGraph::build(3, 3, &normals.mask).unwrap();
        let targets = edge_targets(&normals, &CameraModel::Orthographic, &graph).unwrap();
        let system = assemble(&graph, &targets, &EdgeWeights::ones(24), 1.0);
        let (a, _) = solve_cg(&system, None, 1e-10, 500).unwrap();
        let shifted = DepthSolution {
            values: a.values.iter().map(|v| v + 17.5).collect(),
            mode: a.mode,
        };
        let (b, _) = solve_cg(&system, Some(&shifted), 1e-10, 500).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_tolerance_rejected() {
        let normals = flat_normals(1, 1);
        let graph = PixelGraph::build(1, 1, &normals.mask).unwrap();
        let targets = edge_targets(&normals, &CameraModel::Orthographic, &graph).unwrap();
        let system = assemble(&graph, &targets, &EdgeWeights::ones(0), 1.0);
        assert!(solve_cg(&system, None, 0.0, 10).is_err());
    }

    #[test]
    fn tilted_plane_is_exact_up_to_offset() {
        // Slope (a, b) in image coordinates; normals (a, -b, 1) normalized.
        let (a, b) = (0.4, -0.25);
        let (w, h) = (3, 3);
        let len = (1.0_f64 + a * a + b * b).sqrt();
        let normals = NormalMap::from_raw(
            w,
            h,
            vec![a / len; w * h],
            vec![-b / len; w * h],
            vec![1.0 / len; w * h],
            vec![true; w * h],
        )
        .unwrap();
        let graph = PixelGraph::build(w, h, &normals.mask).unwrap();
        let (sol, report) = poisson_baseline(&normals, &CameraModel::Orthographic, &graph).unwrap();
        assert!(report.converged);
        // Compare against the analytic plane after matching means.
        let analytic: Vec<f64> = (0..graph.vertex_count())
            .map(|v| {
                let (u, vv) = graph.vertex_position(v);
                a * u + b * vv
            })
            .collect();
        let mean_a = analytic.iter().sum::<f64>() / analytic.len() as f64;
        for (got, want) in sol.values.iter().zip(&analytic) {
            assert!((got - (want - mean_a)).abs() < 1e-8, "got {got}, want {}", want - mean_a);
        }
    }

    #[test]
    fn hemisphere_rim_stays_finite() {
        // n_z -> 0 at the rim; the multiplied-through residual keeps the
        // system finite.
        let (w, h) = (9, 9);
        let r = 4.4_f64;
        let (cx, cy) = (4.0, 4.0);
        let mut nx = vec![0.0; w * h];
        let mut ny = vec![0.0; w * h];
        let mut nz = vec![0.0; w * h];
        let mut mask = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let du = x as f64 - cx;
                let dv = y as f64 - cy;
                let rho2 = du * du + dv * dv;
                if rho2 < r * r {
                    let i = y * w + x;
                    nx[i] = du / r;
                    ny[i] = -dv / r;
                    nz[i] = (r * r - rho2).sqrt() / r;
                    mask[i] = true;
                }
            }
        }
        let normals = NormalMap::from_raw(w, h, nx, ny, nz, mask).unwrap();
        let graph = PixelGraph::build(w, h, normals.mask.as_slice()).unwrap();
        let (sol, _) = poisson_baseline(&normals, &CameraModel::Orthographic, &graph).unwrap();
        assert!(sol.values.iter().all(|v| v.is_finite()));
    }
}
