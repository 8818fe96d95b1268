//! Wavefront OBJ export: one `v` record per graph vertex, one quad `f`
//! record per pixel.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::Error;
use crate::mesh::QuadMesh;
use crate::Result;

pub fn write_obj(mesh: &QuadMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(mesh.positions.len() * 24);
    for p in &mesh.positions {
        out.push_str(&format!("v {} {} {}\n", p[0], p[1], p[2]));
    }
    for f in &mesh.faces {
        out.push_str(&format!(
            "f {} {} {} {}\n",
            f[0] + 1,
            f[1] + 1,
            f[2] + 1,
            f[3] + 1
        ));
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradients::CameraModel;
    use crate::graph::{DepthSolution, PixelGraph, ProjectionMode};
    use crate::mesh::export_quad_mesh;

    #[test]
    fn single_pixel_obj_shape() {
        let graph = PixelGraph::build(1, 1, &[true]).unwrap();
        let depth = DepthSolution {
            values: vec![1.0; 4],
            mode: ProjectionMode::Orthographic,
        };
        let mesh = export_quad_mesh(&graph, &depth, &CameraModel::Orthographic);
        let dir = std::env::temp_dir().join("normint-obj-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("one.obj");
        write_obj(&mesh, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 4);
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 1);
        // 1-indexed face referencing all four vertices
        assert!(text.contains("f 1 3 4 2"));
    }
}
