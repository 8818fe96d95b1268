//! The discrete integration domain: one quadrilateral per masked pixel,
//! bridged with auxiliary edges.
//!
//! Every masked pixel owns four depth vertices placed on its corners, never
//! shared with other pixels. The four quad edges of a pixel carry the
//! normal-derived gradient targets; every 4-adjacent masked pixel pair is
//! bridged by exactly two axis-aligned auxiliary edges (one per facing
//! corner pair) that carry the explicit jump field `g'`. Quad edges have
//! length one pixel; auxiliary edges connect geometrically coincident
//! corners, so their directional derivative is the raw value difference
//! (the jump magnitude).

use crate::error::Error;
use crate::grid::ScalarMap;
use crate::Result;

/// Edge direction in image space: `X` along `u` (rightward), `Y` along `v`
/// (downward).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Corner of a pixel quadrilateral. North is the smaller `v` coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corner {
    Nw = 0,
    Ne = 1,
    Sw = 2,
    Se = 3,
}

impl Corner {
    pub const ALL: [Corner; 4] = [Corner::Nw, Corner::Ne, Corner::Sw, Corner::Se];

    /// Corner offset from the pixel center, in pixel units.
    pub fn offset(self) -> (f64, f64) {
        match self {
            Corner::Nw => (-0.5, -0.5),
            Corner::Ne => (0.5, -0.5),
            Corner::Sw => (-0.5, 0.5),
            Corner::Se => (0.5, 0.5),
        }
    }
}

/// Identifies an edge of the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeId {
    Quad(usize),
    Aux(usize),
}

/// An edge interior to one pixel's quadrilateral.
#[derive(Debug, Clone)]
pub struct QuadEdge {
    pub tail: usize,
    pub head: usize,
    /// Masked-pixel index of the owning pixel.
    pub pixel: usize,
    pub axis: Axis,
}

/// An auxiliary edge bridging one facing corner pair of two adjacent pixels.
#[derive(Debug, Clone)]
pub struct AuxEdge {
    pub tail: usize,
    pub head: usize,
    /// Masked-pixel indices of the bridged pair `(tail side, head side)`.
    pub pixels: (usize, usize),
    pub axis: Axis,
    /// The parallel quad edges flanking this bridge, one in each pixel.
    pub flanks: [usize; 2],
    /// Auxiliary edges bridging the previous/next pixel pair along `axis`,
    /// of the same corner class. `None` at mask or image boundaries.
    pub neighbors: [Option<usize>; 2],
}

/// Whether depth values are stored directly or as log-depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMode {
    Orthographic,
    Perspective,
}

/// Per-vertex solution of an integration solve. In perspective mode the
/// values are log-depth; [`average_to_depth_map`] exponentiates.
#[derive(Debug, Clone)]
pub struct DepthSolution {
    pub values: Vec<f64>,
    pub mode: ProjectionMode,
}

/// The integration domain graph for one mask.
#[derive(Debug, Clone)]
pub struct PixelGraph {
    pub width: usize,
    pub height: usize,
    mask: Vec<bool>,
    /// Grid position → masked-pixel index.
    slot: Vec<Option<usize>>,
    /// Masked-pixel index → grid position `(x, y)`.
    pixels: Vec<(usize, usize)>,
    pub quad_edges: Vec<QuadEdge>,
    pub aux_edges: Vec<AuxEdge>,
    /// Connected component (of the 4-connected mask) per masked pixel.
    component: Vec<usize>,
    n_components: usize,
}

impl PixelGraph {
    /// Builds the graph for a pixel mask given in row-major order.
    pub fn build(width: usize, height: usize, mask: &[bool]) -> Result<Self> {
        if mask.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} entries for a {}x{} grid",
                mask.len(),
                width,
                height
            )));
        }
        let mut slot = vec![None; width * height];
        let mut pixels = Vec::new();
        for y in 0..height {
            for x in 0..width {
                if mask[y * width + x] {
                    slot[y * width + x] = Some(pixels.len());
                    pixels.push((x, y));
                }
            }
        }
        if pixels.is_empty() {
            return Err(Error::EmptyDomain);
        }

        let mut quad_edges = Vec::with_capacity(4 * pixels.len());
        for (p, _) in pixels.iter().enumerate() {
            let v = |c: Corner| 4 * p + c as usize;
            quad_edges.push(QuadEdge {
                tail: v(Corner::Nw),
                head: v(Corner::Ne),
                pixel: p,
                axis: Axis::X,
            });
            quad_edges.push(QuadEdge {
                tail: v(Corner::Sw),
                head: v(Corner::Se),
                pixel: p,
                axis: Axis::X,
            });
            quad_edges.push(QuadEdge {
                tail: v(Corner::Nw),
                head: v(Corner::Sw),
                pixel: p,
                axis: Axis::Y,
            });
            quad_edges.push(QuadEdge {
                tail: v(Corner::Ne),
                head: v(Corner::Se),
                pixel: p,
                axis: Axis::Y,
            });
        }

        // Auxiliary edges, two per adjacent pair. `pair_id[class]` remembers
        // the edge id for each pixel pair so neighbor links can be resolved
        // in a second pass; x-pairs are keyed by the left pixel, y-pairs by
        // the upper pixel.
        let mut aux_edges: Vec<AuxEdge> = Vec::new();
        let mut x_pair_id = [
            vec![None::<usize>; width * height],
            vec![None::<usize>; width * height],
        ];
        let mut y_pair_id = [
            vec![None::<usize>; width * height],
            vec![None::<usize>; width * height],
        ];
        for (p, &(x, y)) in pixels.iter().enumerate() {
            let v = |q: usize, c: Corner| 4 * q + c as usize;
            if x + 1 < width {
                if let Some(q) = slot[y * width + x + 1] {
                    for (class, (tc, hc)) in
                        [(Corner::Ne, Corner::Nw), (Corner::Se, Corner::Sw)].iter().enumerate()
                    {
                        x_pair_id[class][y * width + x] = Some(aux_edges.len());
                        aux_edges.push(AuxEdge {
                            tail: v(p, *tc),
                            head: v(q, *hc),
                            pixels: (p, q),
                            axis: Axis::X,
                            flanks: [4 * p + class, 4 * q + class],
                            neighbors: [None, None],
                        });
                    }
                }
            }
            if y + 1 < height {
                if let Some(q) = slot[(y + 1) * width + x] {
                    for (class, (tc, hc)) in
                        [(Corner::Sw, Corner::Nw), (Corner::Se, Corner::Ne)].iter().enumerate()
                    {
                        y_pair_id[class][y * width + x] = Some(aux_edges.len());
                        aux_edges.push(AuxEdge {
                            tail: v(p, *tc),
                            head: v(q, *hc),
                            pixels: (p, q),
                            axis: Axis::Y,
                            flanks: [4 * p + 2 + class, 4 * q + 2 + class],
                            neighbors: [None, None],
                        });
                    }
                }
            }
        }
        for e in 0..aux_edges.len() {
            let (p, _) = aux_edges[e].pixels;
            let (x, y) = pixels[p];
            let class = (aux_edges[e].flanks[0] % 4) % 2;
            // The pair key (x, y) is the left/upper pixel, so "next" along X
            // stays inside row y because x + 1 < width whenever the pair exists.
            let (prev, next) = match aux_edges[e].axis {
                Axis::X => (
                    x.checked_sub(1).and_then(|px| x_pair_id[class][y * width + px]),
                    x_pair_id[class][y * width + x + 1],
                ),
                Axis::Y => (
                    y.checked_sub(1).and_then(|py| y_pair_id[class][py * width + x]),
                    y_pair_id[class].get((y + 1) * width + x).copied().flatten(),
                ),
            };
            aux_edges[e].neighbors = [prev, next];
        }

        let (component, n_components) = label_components(width, height, &slot, &pixels);

        Ok(Self {
            width,
            height,
            mask: mask.to_vec(),
            slot,
            pixels,
            quad_edges,
            aux_edges,
            component,
            n_components,
        })
    }

    pub fn vertex_count(&self) -> usize {
        4 * self.pixels.len()
    }

    pub fn pixel_count(&self) -> usize {
        self.pixels.len()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Masked-pixel index at grid position `(x, y)`, if masked.
    pub fn pixel_at(&self, x: usize, y: usize) -> Option<usize> {
        self.slot[y * self.width + x]
    }

    /// Grid position of a masked pixel.
    pub fn pixel_position(&self, pixel: usize) -> (usize, usize) {
        self.pixels[pixel]
    }

    pub fn vertex_id(&self, pixel: usize, corner: Corner) -> usize {
        4 * pixel + corner as usize
    }

    /// Pixel owning a vertex.
    pub fn vertex_pixel(&self, vertex: usize) -> usize {
        vertex / 4
    }

    /// Geometric position of a vertex in pixel units.
    pub fn vertex_position(&self, vertex: usize) -> (f64, f64) {
        let (x, y) = self.pixels[vertex / 4];
        let (du, dv) = Corner::ALL[vertex % 4].offset();
        (x as f64 + du, y as f64 + dv)
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn pixel_component(&self, pixel: usize) -> usize {
        self.component[pixel]
    }

    pub fn vertex_component(&self, vertex: usize) -> usize {
        self.component[vertex / 4]
    }
}

fn label_components(
    width: usize,
    height: usize,
    slot: &[Option<usize>],
    pixels: &[(usize, usize)],
) -> (Vec<usize>, usize) {
    let mut component = vec![usize::MAX; pixels.len()];
    let mut n = 0;
    let mut stack = Vec::new();
    for start in 0..pixels.len() {
        if component[start] != usize::MAX {
            continue;
        }
        component[start] = n;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (x, y) = pixels[p];
            let mut visit = |q: Option<usize>| {
                if let Some(q) = q {
                    if component[q] == usize::MAX {
                        component[q] = n;
                        stack.push(q);
                    }
                }
            };
            if x > 0 {
                visit(slot[y * width + x - 1]);
            }
            if x + 1 < width {
                visit(slot[y * width + x + 1]);
            }
            if y > 0 {
                visit(slot[(y - 1) * width + x]);
            }
            if y + 1 < height {
                visit(slot[(y + 1) * width + x]);
            }
        }
        n += 1;
    }
    (component, n)
}

/// Directional derivative of the solution along an edge.
///
/// Quad edges span one pixel unit; auxiliary edges connect coincident
/// corners, so both reduce to the head/tail value difference.
pub fn directional_derivative(graph: &PixelGraph, depth: &DepthSolution, edge: EdgeId) -> f64 {
    let (tail, head) = match edge {
        EdgeId::Quad(i) => {
            let e = &graph.quad_edges[i];
            (e.tail, e.head)
        }
        EdgeId::Aux(i) => {
            let e = &graph.aux_edges[i];
            (e.tail, e.head)
        }
    };
    depth.values[head] - depth.values[tail]
}

/// Collapses the per-vertex solution to a per-pixel depth map: each masked
/// pixel becomes the arithmetic mean of its four vertex values, after
/// exponentiation in perspective mode. Unmasked pixels are NaN.
pub fn average_to_depth_map(graph: &PixelGraph, depth: &DepthSolution) -> ScalarMap {
    let mut map = ScalarMap::filled(graph.width, graph.height, f64::NAN);
    for p in 0..graph.pixel_count() {
        let (x, y) = graph.pixel_position(p);
        let mut sum = 0.0;
        for c in Corner::ALL {
            let v = depth.values[graph.vertex_id(p, c)];
            sum += match depth.mode {
                ProjectionMode::Orthographic => v,
                ProjectionMode::Perspective => v.exp(),
            };
        }
        map.set(x, y, sum / 4.0);
    }
    map
}
