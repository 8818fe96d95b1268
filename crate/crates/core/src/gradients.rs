//! Conversion of input normals into per-edge gradient targets.
//!
//! Quad-edge residuals are always formed in the multiplied-through shape
//! `nz_eff * D_e d - n_component`, never by dividing through `n_z`: pixels
//! whose surface turns tangent to the view direction (`n_z -> 0`) stay
//! representable and simply lose influence. The perspective camera swaps
//! `n_z` for the image-coordinate-adjusted `ñ_z` and the solve variable for
//! log-depth; everything else is shared with the orthographic path.

use crate::error::Error;
use crate::graph::{Axis, PixelGraph, ProjectionMode};
use crate::grid::ScalarMap;
use crate::Result;

/// Camera model of the normal map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CameraModel {
    Orthographic,
    /// Pinhole camera with focal length and principal point in pixels.
    Perspective { focal: f64, center: (f64, f64) },
}

impl CameraModel {
    pub fn mode(&self) -> ProjectionMode {
        match self {
            CameraModel::Orthographic => ProjectionMode::Orthographic,
            CameraModel::Perspective { .. } => ProjectionMode::Perspective,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let CameraModel::Perspective { focal, .. } = self {
            if !(*focal > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "perspective focal length must be positive, got {focal}"
                )));
            }
        }
        Ok(())
    }

    /// The constant scale applied to auxiliary residuals: 1 for orthographic,
    /// `f` for perspective (the effective nz of an identity normal).
    pub fn nz_aux(&self) -> f64 {
        match self {
            CameraModel::Orthographic => 1.0,
            CameraModel::Perspective { focal, .. } => *focal,
        }
    }
}

/// Per-pixel unit normals plus validity mask; the sole algorithmic input.
///
/// Normals are camera-space with `+x` right, `+y` up, `+z` toward the
/// camera; masked pixels are front-facing (`n_z > 0`).
#[derive(Debug, Clone)]
pub struct NormalMap {
    pub width: usize,
    pub height: usize,
    pub nx: Vec<f64>,
    pub ny: Vec<f64>,
    pub nz: Vec<f64>,
    pub mask: Vec<bool>,
}

impl NormalMap {
    /// Builds a normal map from raw components, renormalizing each masked
    /// pixel. Pixels with `|n| < 0.1` are treated as holes and unmasked, as
    /// are pixels with non-positive `n_z`.
    pub fn from_raw(
        width: usize,
        height: usize,
        nx: Vec<f64>,
        ny: Vec<f64>,
        nz: Vec<f64>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        let len = width * height;
        if nx.len() != len || ny.len() != len || nz.len() != len || mask.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "normal components must all have {len} entries"
            )));
        }
        let mut map = Self {
            width,
            height,
            nx,
            ny,
            nz,
            mask,
        };
        for i in 0..len {
            if !map.mask[i] {
                continue;
            }
            let norm =
                (map.nx[i] * map.nx[i] + map.ny[i] * map.ny[i] + map.nz[i] * map.nz[i]).sqrt();
            if !norm.is_finite() || norm < 0.1 || map.nz[i] <= 0.0 {
                map.mask[i] = false;
                continue;
            }
            map.nx[i] /= norm;
            map.ny[i] /= norm;
            map.nz[i] /= norm;
        }
        Ok(map)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Per-quad-edge target stored as the pair `(numerator, nz)` so residuals
/// never divide by `n_z`. The residual of edge `e` is `nz * D_e d - numerator`.
#[derive(Debug, Clone, Copy)]
pub struct EdgeTarget {
    /// Signed normal component along the edge direction (`n_x` for x-edges,
    /// `-n_y` for y-edges, which point down the image).
    pub numerator: f64,
    /// Effective z-component of the owning pixel.
    pub nz: f64,
}

impl EdgeTarget {
    /// The classical gradient target `ĝ(e)`; infinite when `nz == 0`.
    pub fn ghat(&self) -> f64 {
        self.numerator / self.nz
    }
}

/// Gradient targets over a graph: quad-edge targets, the per-pixel effective
/// nz map, the auxiliary residual scale, and the auxiliary edit field `g'`.
#[derive(Debug, Clone)]
pub struct GradientTargets {
    pub quad: Vec<EdgeTarget>,
    /// Effective z-component per pixel (`n_z` orthographic, `ñ_z` perspective);
    /// NaN on unmasked pixels.
    pub nz_eff: ScalarMap,
    /// Constant scale for auxiliary residuals (1 orthographic, `f` perspective).
    pub nz_aux: f64,
    /// Per-auxiliary-edge edit value, initialized to zero.
    pub gprime: Vec<f64>,
    pub mode: ProjectionMode,
}

impl GradientTargets {
    /// Effective nz of a pixel normalized to the orthographic range:
    /// `nz_eff` itself for orthographic input, `ñ_z / f` for perspective.
    /// This is the quantity the tangentness scale compares.
    pub fn nz_normalized(&self, pixel_x: usize, pixel_y: usize) -> f64 {
        self.nz_eff.at(pixel_x, pixel_y) / self.nz_aux
    }
}

/// Per-auxiliary-edge IRLS weights in `(0, 1]`.
#[derive(Debug, Clone)]
pub struct EdgeWeights(pub Vec<f64>);

impl EdgeWeights {
    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }
}

/// Effective z-component of each masked pixel's normal.
///
/// Orthographic cameras use `n_z` verbatim. A perspective camera with focal
/// length `f` and principal point `(c_u, c_v)` adjusts it to
/// `ñ_z = n_x (u - c_u) + n_y (v - c_v) + n_z f`, evaluated at the pixel
/// center. Zero or negative values are permitted; downstream residual
/// scaling absorbs them.
pub fn effective_nz(normals: &NormalMap, camera: &CameraModel) -> ScalarMap {
    let mut out = ScalarMap::filled(normals.width, normals.height, f64::NAN);
    for y in 0..normals.height {
        for x in 0..normals.width {
            let i = normals.index(x, y);
            if !normals.mask[i] {
                continue;
            }
            let value = match camera {
                CameraModel::Orthographic => normals.nz[i],
                CameraModel::Perspective {
                    focal,
                    center: (cu, cv),
                } => {
                    normals.nx[i] * (x as f64 - cu)
                        + normals.ny[i] * (y as f64 - cv)
                        + normals.nz[i] * focal
                }
            };
            out.set(x, y, value);
        }
    }
    out
}

/// Projects the per-pixel gradient onto the quad edges of a graph built from
/// the same mask, and initializes `g'` to zero on the auxiliary edges.
///
/// X-edges (pointing along `+u`) carry numerator `n_x`; y-edges point down
/// the image while camera `+y` points up, so they carry `-n_y`.
pub fn edge_targets(
    normals: &NormalMap,
    camera: &CameraModel,
    graph: &PixelGraph,
) -> Result<GradientTargets> {
    camera.validate()?;
    if graph.width != normals.width || graph.height != normals.height {
        return Err(Error::DimensionMismatch(format!(
            "graph is {}x{} but normal map is {}x{}",
            graph.width, graph.height, normals.width, normals.height
        )));
    }
    let nz_eff = effective_nz(normals, camera);
    let mut quad = Vec::with_capacity(graph.quad_edges.len());
    for e in &graph.quad_edges {
        let (x, y) = graph.pixel_position(e.pixel);
        let i = normals.index(x, y);
        debug_assert!(normals.mask[i], "quad edge in unmasked pixel");
        let numerator = match e.axis {
            Axis::X => normals.nx[i],
            Axis::Y => -normals.ny[i],
        };
        quad.push(EdgeTarget {
            numerator,
            nz: nz_eff.at(x, y),
        });
    }
    Ok(GradientTargets {
        quad,
        nz_eff,
        nz_aux: camera.nz_aux(),
        gprime: vec![0.0; graph.aux_edges.len()],
        mode: camera.mode(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_normals(w: usize, h: usize, n: (f64, f64, f64)) -> NormalMap {
        NormalMap::from_raw(
            w,
            h,
            vec![n.0; w * h],
            vec![n.1; w * h],
            vec![n.2; w * h],
            vec![true; w * h],
        )
        .unwrap()
    }

    #[test]
    fn orthographic_nz_is_verbatim() {
        let n = uniform_normals(2, 2, (0.0, 0.0, 1.0));
        let nz = effective_nz(&n, &CameraModel::Orthographic);
        assert_eq!(nz.at(1, 1), 1.0);
    }

    #[test]
    fn perspective_identity_normal_gives_focal() {
        let n = uniform_normals(3, 3, (0.0, 0.0, 1.0));
        let cam = CameraModel::Perspective {
            focal: 600.0,
            center: (1.0, 1.0),
        };
        let nz = effective_nz(&n, &cam);
        for y in 0..3 {
            for x in 0..3 {
                assert_eq!(nz.at(x, y), 600.0);
            }
        }
    }

    #[test]
    fn perspective_substitution() {
        // n = (1, 0, 0), u - c_u = 50, f = 600: only the first term survives.
        let mut n = uniform_normals(1, 1, (1.0, 0.0, 0.5));
        n.nx[0] = 1.0;
        n.ny[0] = 0.0;
        n.nz[0] = 0.0;
        n.mask[0] = true;
        let cam = CameraModel::Perspective {
            focal: 600.0,
            center: (-50.0, 0.0),
        };
        let nz = effective_nz(&n, &cam);
        assert_eq!(nz.at(0, 0), 50.0);
    }

    #[test]
    fn flat_normal_targets_are_zero() {
        let n = uniform_normals(2, 2, (0.0, 0.0, 1.0));
        let g = PixelGraph::build(2, 2, &n.mask).unwrap();
        let t = edge_targets(&n, &CameraModel::Orthographic, &g).unwrap();
        for e in &t.quad {
            assert_eq!(e.ghat(), 0.0);
        }
        assert!(t.gprime.iter().all(|&v| v == 0.0));
        assert_eq!(t.gprime.len(), g.aux_edges.len());
    }

    #[test]
    fn forty_five_degree_slope() {
        let s = 1.0 / 2.0_f64.sqrt();
        let n = uniform_normals(1, 1, (s, 0.0, s));
        let g = PixelGraph::build(1, 1, &n.mask).unwrap();
        let t = edge_targets(&n, &CameraModel::Orthographic, &g).unwrap();
        for (e, target) in g.quad_edges.iter().zip(&t.quad) {
            match e.axis {
                Axis::X => assert!((target.ghat() - 1.0).abs() < 1e-12),
                Axis::Y => assert_eq!(target.ghat(), 0.0),
            }
        }
    }

    #[test]
    fn three_four_five_slope() {
        let n = uniform_normals(1, 1, (0.6, 0.0, 0.8));
        let g = PixelGraph::build(1, 1, &n.mask).unwrap();
        let t = edge_targets(&n, &CameraModel::Orthographic, &g).unwrap();
        let x_edge = g.quad_edges.iter().position(|e| e.axis == Axis::X).unwrap();
        assert!((t.quad[x_edge].ghat() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn zero_nz_is_representable() {
        // A pixel turned fully tangent keeps its numerator; no division happens.
        let n = NormalMap::from_raw(
            1,
            1,
            vec![1.0],
            vec![0.0],
            vec![1e-9],
            vec![true],
        )
        .unwrap();
        let g = PixelGraph::build(1, 1, &n.mask).unwrap();
        let t = edge_targets(&n, &CameraModel::Orthographic, &g).unwrap();
        let x_edge = g.quad_edges.iter().position(|e| e.axis == Axis::X).unwrap();
        assert!(t.quad[x_edge].numerator > 0.999);
        assert!(t.quad[x_edge].nz.abs() < 1e-8);
    }

    #[test]
    fn short_normals_become_holes() {
        let n = NormalMap::from_raw(
            2,
            1,
            vec![0.0, 0.01],
            vec![0.0, 0.01],
            vec![1.0, 0.01],
            vec![true, true],
        )
        .unwrap();
        assert!(n.mask[0]);
        assert!(!n.mask[1]);
    }

    #[test]
    fn back_facing_normals_become_holes() {
        let n = NormalMap::from_raw(1, 1, vec![0.0], vec![0.0], vec![-1.0], vec![true]).unwrap();
        assert!(!n.mask[0]);
    }
}
