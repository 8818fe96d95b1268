//! Synthetic test scenes with analytic ground truth.
//!
//! A scene bundles a ground-truth depth map, the exact normal map of that
//! surface under the stated camera, and the set of ground-truth
//! discontinuity crossings. Normals are sampled analytically at pixel
//! centers.
//!
//! Scenes with occlusion jumps are built as *anchored faults*: two flat
//! regions separated by a straight seam. The near side's edge column carries
//! a steep visible shoulder (the surface curling toward the occlusion edge,
//! which is what gives real occlusion boundaries their `n_z` contrast); the
//! bulk of the jump is hidden between the pixel columns. A smooth
//! angular-ramp wedge around the seam's lower end keeps the domain connected
//! around the seam, so the hidden height is determined by the data (the
//! gradient field has a loop defect of exactly that height). A full-height
//! invisible seam would cut the domain in two and leave the jump
//! unobservable; a smooth least-squares solve smears the loop defect over
//! the whole domain instead of concentrating it at the seam.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::gradients::{CameraModel, NormalMap};
use crate::grid::ScalarMap;
use crate::Result;

/// A ground-truth discontinuity crossing between two 4-adjacent pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seam {
    pub a: (usize, usize),
    pub b: (usize, usize),
}

impl Seam {
    /// Midpoint of the crossing in pixel coordinates.
    pub fn midpoint(&self) -> (f64, f64) {
        (
            (self.a.0 as f64 + self.b.0 as f64) / 2.0,
            (self.a.1 as f64 + self.b.1 as f64) / 2.0,
        )
    }
}

/// A synthetic scene: analytic depth, its exact normal map, and the known
/// discontinuity set.
#[derive(Debug, Clone)]
pub struct Scene {
    pub name: String,
    pub gt_depth: ScalarMap,
    pub normals: NormalMap,
    pub camera: CameraModel,
    pub seams: Vec<Seam>,
}

/// Scans all 4-adjacent masked pixel pairs and returns those whose
/// ground-truth depth difference exceeds `min_jump`.
pub fn detect_seams(gt: &ScalarMap, mask: &[bool], min_jump: f64) -> Vec<Seam> {
    let (w, h) = (gt.width, gt.height);
    let mut seams = Vec::new();
    let masked = |x: usize, y: usize| mask[y * w + x];
    for y in 0..h {
        for x in 0..w {
            if !masked(x, y) {
                continue;
            }
            if x + 1 < w && masked(x + 1, y) && (gt.at(x, y) - gt.at(x + 1, y)).abs() > min_jump {
                seams.push(Seam {
                    a: (x, y),
                    b: (x + 1, y),
                });
            }
            if y + 1 < h && masked(x, y + 1) && (gt.at(x, y) - gt.at(x, y + 1)).abs() > min_jump {
                seams.push(Seam {
                    a: (x, y),
                    b: (x, y + 1),
                });
            }
        }
    }
    seams
}

fn scene_from_gradient_field(
    name: &str,
    size: (usize, usize),
    depth: impl Fn(f64, f64) -> f64,
    grad: impl Fn(f64, f64) -> (f64, f64),
    min_jump: f64,
) -> Scene {
    let (w, h) = size;
    let gt = ScalarMap::from_fn(w, h, |x, y| depth(x as f64, y as f64));
    let mut nx = vec![0.0; w * h];
    let mut ny = vec![0.0; w * h];
    let mut nz = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (gu, gv) = grad(x as f64, y as f64);
            let len = (1.0 + gu * gu + gv * gv).sqrt();
            let i = y * w + x;
            nx[i] = gu / len;
            ny[i] = -gv / len;
            nz[i] = 1.0 / len;
        }
    }
    let normals = NormalMap::from_raw(w, h, nx, ny, nz, vec![true; w * h])
        .expect("component lengths match by construction");
    let seams = detect_seams(&gt, &normals.mask, min_jump);
    Scene {
        name: name.to_string(),
        gt_depth: gt,
        normals,
        camera: CameraModel::Orthographic,
        seams,
    }
}

/// Tilted plane `depth = a*u + b*v` (image coordinates, depth away from the
/// camera), constant normal `(a, -b, 1)` normalized.
pub fn make_plane(slope: (f64, f64), size: (usize, usize)) -> Result<Scene> {
    let (w, h) = size;
    if w < 2 || h < 2 {
        return Err(Error::DegenerateScene(format!(
            "plane needs at least 2x2 pixels, got {w}x{h}"
        )));
    }
    let (a, b) = slope;
    Ok(scene_from_gradient_field(
        "plane",
        size,
        |u, v| a * u + b * v,
        |_, _| (a, b),
        f64::INFINITY,
    ))
}

/// Quintic smoothstep and its derivative on [0, 1].
fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

fn smoothstep_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        30.0 * t * t * (t - 1.0) * (t - 1.0)
    }
}

/// One occlusion-style vertical fault.
///
/// The depth step splits into a steep *visible shoulder* on the near side
/// (the surface curling toward the occlusion edge over roughly one pixel,
/// which gives the seam its `n_z` contrast) and a *hidden jump* across the
/// cut itself. The hidden part is an angular ramp around the fault tip: zero
/// on one side of the upward cut, `hidden` on the other, transitioning
/// smoothly through the downward sector of half-angle `half_width`, which
/// keeps the domain connected around the seam and the jump height
/// observable.
struct Fault {
    tip: (f64, f64),
    hidden: f64,
    shoulder: f64,
    shoulder_base_width: f64,
    half_width: f64,
}

impl Fault {
    fn signed(&self) -> f64 {
        if self.hidden >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Shoulder ramp width. Along the seam it is a few pixels wide; below
    /// the tip it widens row by row, flattening the curl into the smooth
    /// anchor wedge so the anchor zone carries no tangentness contrast.
    fn shoulder_width(&self, v: f64) -> f64 {
        self.shoulder_base_width + (v - (self.tip.1 + 0.5)).max(0.0)
    }

    /// Normalized distance from the cut measured into the near side (the
    /// left side for an upward jump, the right for a downward one).
    fn shoulder_xi(&self, u: f64, v: f64) -> f64 {
        self.signed() * (self.tip.0 - u) / self.shoulder_width(v)
    }

    /// The visible curl: height `(1 - xi)^3` of the shoulder above the near
    /// flat, steepest at the cut like a surface turning toward an occlusion
    /// edge, saturated on the far side so the far flat carries the full
    /// shoulder height.
    fn curl(xi: f64) -> f64 {
        if xi <= 0.0 {
            1.0
        } else if xi >= 1.0 {
            0.0
        } else {
            let s = 1.0 - xi;
            s * s * s
        }
    }

    fn curl_deriv(xi: f64) -> f64 {
        if xi <= 0.0 || xi >= 1.0 {
            0.0
        } else {
            let s = 1.0 - xi;
            -3.0 * s * s
        }
    }

    fn depth(&self, u: f64, v: f64) -> f64 {
        let x = u - self.tip.0;
        let y = v - self.tip.1;
        let gamma = x.atan2(y);
        let base = if self.signed() > 0.0 { 0.0 } else { -1.0 };
        self.hidden * smoothstep((gamma + self.half_width) / (2.0 * self.half_width))
            + self.shoulder * (Self::curl(self.shoulder_xi(u, v)) + base)
    }

    fn grad(&self, u: f64, v: f64) -> (f64, f64) {
        let x = u - self.tip.0;
        let y = v - self.tip.1;
        let rho2 = x * x + y * y;
        let gamma = x.atan2(y);
        let chi = smoothstep_deriv((gamma + self.half_width) / (2.0 * self.half_width))
            / (2.0 * self.half_width);
        let w = self.shoulder_width(v);
        let xi = self.shoulder_xi(u, v);
        let dcurl = Self::curl_deriv(xi);
        let w_growth = if v > self.tip.1 + 0.5 { 1.0 } else { 0.0 };
        (
            self.hidden * chi * y / rho2 + self.shoulder * dcurl * (-self.signed() / w),
            self.hidden * chi * (-x) / rho2
                + self.shoulder * dcurl * (-xi * w_growth / w),
        )
    }
}

const FAULT_HALF_WIDTH: f64 = 0.9;
const SHOULDER_WIDTH: f64 = 3.0;
/// Comb boundaries sit a few pixels apart; their shoulders must not overlap
/// and cancel, so they are narrower than the step's.
const COMB_SHOULDER_WIDTH: f64 = 2.0;
/// Fraction of the image height above the step fault tip (the seam's extent).
const STEP_TIP_FRACTION: f64 = 0.62;
/// Comb teeth use shorter seams so the total detected-edge budget stays
/// sparse even at sixteen boundaries.
const COMB_TIP_FRACTION: f64 = 0.35;

/// Portion of a jump carried by the visible shoulder, capped so the shoulder
/// slope stays finite enough for `n_z` to remain well above zero.
fn shoulder_height(jump: f64) -> f64 {
    (0.4 * jump.abs()).min(2.0)
}

/// Step scene: two flat regions at depths 0 and `jump`, separated by a
/// vertical occlusion seam between the two center columns. The near side's
/// edge column carries the visible shoulder; the rest of the jump is hidden.
/// The seam runs from the top edge down to a tip at 70% height; below the
/// tip the regions are joined by a smooth angular wedge that anchors the
/// jump.
pub fn make_step(jump: f64, size: (usize, usize)) -> Result<Scene> {
    let (w, h) = size;
    if !(jump > 0.0) || w < 8 || h < 8 {
        return Err(Error::DegenerateScene(format!(
            "step needs a positive jump and at least 8x8 pixels, got jump {jump} at {w}x{h}"
        )));
    }
    let shoulder = shoulder_height(jump);
    let fault = Fault {
        tip: (w as f64 / 2.0 - 0.5, (STEP_TIP_FRACTION * h as f64).floor()),
        hidden: jump - shoulder,
        shoulder,
        shoulder_base_width: SHOULDER_WIDTH,
        half_width: FAULT_HALF_WIDTH,
    };
    Ok(scene_from_gradient_field(
        "step",
        size,
        |u, v| fault.depth(u, v),
        |u, v| fault.grad(u, v),
        jump / 2.0,
    ))
}

/// Comb scene: `teeth` raised strips of height `depth`, their vertical
/// boundaries hidden seams anchored by per-boundary wedges at 60% height.
pub fn make_comb(teeth: usize, depth: f64, size: (usize, usize)) -> Result<Scene> {
    let (w, h) = size;
    if teeth == 0 || !(depth > 0.0) {
        return Err(Error::DegenerateScene(format!(
            "comb needs positive teeth and depth, got {teeth} and {depth}"
        )));
    }
    let period = w / teeth;
    if period < 4 || h < 16 {
        return Err(Error::DegenerateScene(format!(
            "comb with {teeth} teeth does not fit a {w}x{h} image"
        )));
    }
    let tip_v = (COMB_TIP_FRACTION * h as f64).floor();
    let shoulder = shoulder_height(depth);
    let mut faults = Vec::new();
    for k in 0..teeth {
        let up = (k * period + period / 4) as f64 - 0.5;
        let down = (k * period + 3 * period / 4) as f64 - 0.5;
        faults.push(Fault {
            tip: (up, tip_v),
            hidden: depth - shoulder,
            shoulder,
            shoulder_base_width: COMB_SHOULDER_WIDTH,
            half_width: FAULT_HALF_WIDTH,
        });
        faults.push(Fault {
            tip: (down, tip_v),
            hidden: -(depth - shoulder),
            shoulder,
            shoulder_base_width: COMB_SHOULDER_WIDTH,
            half_width: FAULT_HALF_WIDTH,
        });
    }
    Ok(scene_from_gradient_field(
        "comb",
        size,
        |u, v| faults.iter().map(|f| f.depth(u, v)).sum(),
        |u, v| {
            faults.iter().fold((0.0, 0.0), |(gu, gv), f| {
                let (du, dv) = f.grad(u, v);
                (gu + du, gv + dv)
            })
        },
        depth / 2.0,
    ))
}

/// A ball of the given radius resting on a backplane, seen from above: the
/// visible dome carries exact sphere normals with `n_z -> 0` at the rim, and
/// the silhouette ring is an occlusion jump onto the plane.
pub fn make_sphere_on_plane(radius: f64, size: (usize, usize)) -> Result<Scene> {
    let (w, h) = size;
    if !(radius > 1.0) || radius * 2.0 + 2.0 > w.min(h) as f64 {
        return Err(Error::DegenerateScene(format!(
            "sphere of radius {radius} does not fit a {w}x{h} image"
        )));
    }
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let dome_height = |u: f64, v: f64| -> Option<f64> {
        let rho2 = (u - cx) * (u - cx) + (v - cy) * (v - cy);
        let d2 = radius * radius - rho2;
        (d2 > 0.0).then(|| d2.sqrt())
    };
    // Plane at depth 0; the ball touches it at depth 0 on its far side, so
    // the visible dome sits at -radius - sqrt(r^2 - rho^2).
    let gt = ScalarMap::from_fn(w, h, |x, y| {
        match dome_height(x as f64, y as f64) {
            Some(z) => -radius - z,
            None => 0.0,
        }
    });
    let mut nx = vec![0.0; w * h];
    let mut ny = vec![0.0; w * h];
    let mut nz = vec![1.0; w * h];
    for y in 0..h {
        for x in 0..w {
            if let Some(z) = dome_height(x as f64, y as f64) {
                let i = y * w + x;
                nx[i] = (x as f64 - cx) / radius;
                ny[i] = -(y as f64 - cy) / radius;
                nz[i] = z / radius;
            }
        }
    }
    let normals = NormalMap::from_raw(w, h, nx, ny, nz, vec![true; w * h])?;
    let seams = detect_seams(&gt, &normals.mask, radius / 2.0);
    Ok(Scene {
        name: "sphere_on_plane".to_string(),
        gt_depth: gt,
        normals,
        camera: CameraModel::Orthographic,
        seams,
    })
}

/// Perspective plane: log-depth linear in image coordinates, depths within
/// `[f/2, 2f]`, normals exact under the perspective camera with principal
/// point at the image center.
pub fn make_perspective_plane(slope: (f64, f64), size: (usize, usize), focal: f64) -> Result<Scene> {
    let (w, h) = size;
    if w < 2 || h < 2 || !(focal > 0.0) {
        return Err(Error::DegenerateScene(format!(
            "perspective plane needs 2x2 pixels and a positive focal, got {w}x{h} at {focal}"
        )));
    }
    let (cu, cv) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (a, b) = slope;
    let max_arg =
        (a.abs() * (w as f64) / 2.0 + b.abs() * (h as f64) / 2.0) / focal;
    if max_arg > std::f64::consts::LN_2 {
        return Err(Error::DegenerateScene(format!(
            "slopes {a},{b} push depths outside [f/2, 2f] at focal {focal}"
        )));
    }
    let gt = ScalarMap::from_fn(w, h, |x, y| {
        focal * (((a * (x as f64 - cu)) + b * (y as f64 - cv)) / focal).exp()
    });
    // Log-depth gradients are (a, b) / f; invert the perspective target
    // relation to get the normal direction.
    let (gu, gv) = (a / focal, b / focal);
    let mut nx = vec![0.0; w * h];
    let mut ny = vec![0.0; w * h];
    let mut nz = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let scale = focal / (1.0 - gu * (x as f64 - cu) + gv * (y as f64 - cv));
            let (dx, dy, dz) = (gu * scale, -gv * scale, 1.0);
            let len = (dx * dx + dy * dy + dz * dz).sqrt();
            let i = y * w + x;
            nx[i] = dx / len;
            ny[i] = dy / len;
            nz[i] = dz / len;
        }
    }
    let normals = NormalMap::from_raw(w, h, nx, ny, nz, vec![true; w * h])?;
    Ok(Scene {
        name: "perspective_plane".to_string(),
        gt_depth: gt,
        normals,
        camera: CameraModel::Perspective {
            focal,
            center: (cu, cv),
        },
        seams: Vec::new(),
    })
}

/// Re-tilts each masked normal by adding zero-mean Gaussian noise to its
/// gradient, per pixel per axis, deterministically per seed. Ground truth is
/// untouched; `sigma = 0` returns the scene unchanged.
pub fn add_gradient_noise(scene: &Scene, sigma: f64, seed: u64) -> Scene {
    if sigma == 0.0 {
        return scene.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = scene.clone();
    let n = &mut out.normals;
    for i in 0..n.mask.len() {
        if !n.mask[i] {
            continue;
        }
        let (e1, e2) = (gaussian(&mut rng), gaussian(&mut rng));
        if n.nz[i] <= 1e-12 {
            // Tangent pixel: the gradient is unbounded, leave it alone.
            continue;
        }
        let gu = n.nx[i] / n.nz[i] + sigma * e1;
        let gv = -n.ny[i] / n.nz[i] + sigma * e2;
        let len = (1.0 + gu * gu + gv * gv).sqrt();
        n.nx[i] = gu / len;
        n.ny[i] = -gv / len;
        n.nz[i] = 1.0 / len;
    }
    out.name = format!("{}+noise", scene.name);
    out
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller on open-interval uniforms.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Mask removal patterns for hole-robustness runs.
#[derive(Debug, Clone)]
pub enum HoleSpec {
    /// `count` disks of the given radius at seeded uniform positions.
    Disks { count: usize, radius: f64 },
    /// One disk at the image center.
    CenteredDisk { radius: f64 },
}

/// Removes mask regions. Rejects specs that would unmask everything.
pub fn punch_holes(scene: &Scene, spec: &HoleSpec, seed: u64) -> Result<Scene> {
    let mut out = scene.clone();
    let (w, h) = (scene.normals.width, scene.normals.height);
    let radius = match spec {
        HoleSpec::Disks { radius, .. } | HoleSpec::CenteredDisk { radius } => *radius,
    };
    let mut centers: Vec<(f64, f64)> = Vec::new();
    match spec {
        HoleSpec::Disks { count, .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..*count {
                let cx = rng.gen_range(0.0..w as f64);
                let cy = rng.gen_range(0.0..h as f64);
                centers.push((cx, cy));
            }
        }
        HoleSpec::CenteredDisk { .. } => {
            centers.push(((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0));
        }
    }
    for y in 0..h {
        for x in 0..w {
            let inside = centers.iter().any(|&(cx, cy)| {
                let du = x as f64 - cx;
                let dv = y as f64 - cy;
                du * du + dv * dv <= radius * radius
            });
            if inside {
                let i = y * w + x;
                out.normals.mask[i] = false;
                out.gt_depth.data[i] = f64::NAN;
            }
        }
    }
    if out.normals.masked_count() == 0 {
        return Err(Error::DegenerateScene(
            "holes removed every masked pixel".to_string(),
        ));
    }
    out.seams.retain(|s| {
        out.normals.mask[s.a.1 * w + s.a.0] && out.normals.mask[s.b.1 * w + s.b.0]
    });
    out.name = format!("{}+holes", scene.name);
    Ok(out)
}
