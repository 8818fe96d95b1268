//! File formats: PFM float maps, 16-bit PNG normal maps, 8-bit PNG
//! heatmaps, and OBJ quad meshes. All writers are deterministic
//! byte-for-byte given identical inputs.

mod obj;
mod pfm;
mod png;

pub use obj::write_obj;
pub use pfm::{read_pfm, write_pfm};
pub use png::{
    read_mask_png, read_normal_map, write_heatmap_png, write_mask_png, write_normal_map,
};

use std::path::Path;

use crate::graph::PixelGraph;
use crate::grid::ScalarMap;
use crate::Result;

/// Per-pixel maximum `|g'|` over the pixel's incident auxiliary edges;
/// NaN on unmasked pixels, zero where a masked pixel has no bridges.
pub fn gprime_map(graph: &PixelGraph, gprime: &[f64]) -> ScalarMap {
    let mut map = ScalarMap::filled(graph.width, graph.height, f64::NAN);
    for p in 0..graph.pixel_count() {
        let (x, y) = graph.pixel_position(p);
        map.set(x, y, 0.0);
    }
    for (e, g) in graph.aux_edges.iter().zip(gprime) {
        for pixel in [e.pixels.0, e.pixels.1] {
            let (x, y) = graph.pixel_position(pixel);
            let current = map.at(x, y);
            if g.abs() > current {
                map.set(x, y, g.abs());
            }
        }
    }
    map
}

/// Writes the `g'` visualization: per-pixel maximum magnitude over incident
/// auxiliary edges, tone-mapped linearly over `[0, max_value]`.
pub fn write_gprime_png(
    graph: &PixelGraph,
    gprime: &[f64],
    max_value: f64,
    path: impl AsRef<Path>,
) -> Result<()> {
    let map = gprime_map(graph, gprime);
    write_heatmap_png(&map, (0.0, max_value), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gprime_map_takes_incident_maximum() {
        let graph = PixelGraph::build(2, 1, &[true, true]).unwrap();
        let map = gprime_map(&graph, &[0.5, -2.0]);
        assert_eq!(map.at(0, 0), 2.0);
        assert_eq!(map.at(1, 0), 2.0);
    }
}
