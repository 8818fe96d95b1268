//! Quad-mesh export of the un-averaged per-vertex solution.
//!
//! One face per pixel, positioned by back-projecting each graph vertex under
//! the camera model. Auxiliary edges never become faces, so recovered
//! discontinuities stay open cuts in the mesh.
//!
//! Mesh space is the camera frame: `+x` right, `+y` up, `+z` toward the
//! camera; a vertex at image position `(u, v)` with depth `d` maps to
//! `(u, -v, -d)` orthographically and to the ray through the pixel scaled by
//! `d` under perspective.

use crate::gradients::CameraModel;
use crate::graph::{Corner, DepthSolution, PixelGraph, ProjectionMode};

#[derive(Debug, Clone)]
pub struct QuadMesh {
    pub positions: Vec<[f64; 3]>,
    /// Counter-clockwise as seen from the camera.
    pub faces: Vec<[usize; 4]>,
}

impl QuadMesh {
    /// Unit normal of a face from its diagonals; NaN-free for planar,
    /// non-degenerate quads.
    pub fn face_normal(&self, face: usize) -> [f64; 3] {
        let [a, b, c, d] = self.faces[face];
        let p = |i: usize| self.positions[i];
        let e1 = sub(p(c), p(a));
        let e2 = sub(p(d), p(b));
        normalize(cross(e1, e2))
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Builds the quad mesh of a solution.
pub fn export_quad_mesh(
    graph: &PixelGraph,
    depth: &DepthSolution,
    camera: &CameraModel,
) -> QuadMesh {
    let mut positions = Vec::with_capacity(graph.vertex_count());
    for v in 0..graph.vertex_count() {
        let (u, vv) = graph.vertex_position(v);
        let d = match depth.mode {
            ProjectionMode::Orthographic => depth.values[v],
            ProjectionMode::Perspective => depth.values[v].exp(),
        };
        let p = match camera {
            CameraModel::Orthographic => [u, -vv, -d],
            CameraModel::Perspective {
                focal,
                center: (cu, cv),
            } => [(u - cu) * d / focal, -(vv - cv) * d / focal, -d],
        };
        positions.push(p);
    }
    let mut faces = Vec::with_capacity(graph.pixel_count());
    for p in 0..graph.pixel_count() {
        faces.push([
            graph.vertex_id(p, Corner::Nw),
            graph.vertex_id(p, Corner::Sw),
            graph.vertex_id(p, Corner::Se),
            graph.vertex_id(p, Corner::Ne),
        ]);
    }
    QuadMesh { positions, faces }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::PixelGraph;

    #[test]
    fn single_pixel_planar_quad() {
        let graph = PixelGraph::build(1, 1, &[true]).unwrap();
        let depth = DepthSolution {
            values: vec![2.0; 4],
            mode: ProjectionMode::Orthographic,
        };
        let mesh = export_quad_mesh(&graph, &depth, &CameraModel::Orthographic);
        assert_eq!(mesh.positions.len(), 4);
        assert_eq!(mesh.faces.len(), 1);
        for p in &mesh.positions {
            assert_eq!(p[2], -2.0);
        }
        // Side length 1.
        let f = mesh.faces[0];
        let d01 = sub(mesh.positions[f[1]], mesh.positions[f[0]]);
        assert_eq!((d01[0] * d01[0] + d01[1] * d01[1] + d01[2] * d01[2]).sqrt(), 1.0);
        // Flat quad faces the camera.
        let n = mesh.face_normal(0);
        assert!((n[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jump_stays_an_open_cut() {
        let graph = PixelGraph::build(2, 1, &[true, true]).unwrap();
        let mut values = vec![0.0; 8];
        values[4..].fill(5.0);
        let depth = DepthSolution {
            values,
            mode: ProjectionMode::Orthographic,
        };
        let mesh = export_quad_mesh(&graph, &depth, &CameraModel::Orthographic);
        assert_eq!(mesh.faces.len(), 2);
        // The two quads share no vertex indices and sit 5 apart in z.
        let f0: Vec<_> = mesh.faces[0].to_vec();
        assert!(mesh.faces[1].iter().all(|v| !f0.contains(v)));
        assert!((mesh.positions[mesh.faces[0][0]][2] - mesh.positions[mesh.faces[1][0]][2]).abs() == 5.0);
    }
}
