//! Scratch driver for the non-step acceptance scenarios.

use normint::gradients::CameraModel;
use normint::graph::PixelGraph;
use normint::metrics::{discontinuity_score, made, made_with_offset};
use normint::optimize::{optimize, SolverConfig};
use normint::scene::{
    add_gradient_noise, make_comb, make_perspective_plane, make_plane, make_step, punch_holes,
    HoleSpec,
};

fn base_config() -> SolverConfig {
    let mut c = SolverConfig::default();
    c.early_stop = true;
    c
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "plane".into());
    match which.as_str() {
        "plane" => {
            let scene = make_plane((0.75, -0.3), (64, 64)).unwrap();
            let mut config = base_config();
            config.cg_tol = 1e-12;
            let t = std::time::Instant::now();
            let r = optimize(&scene.normals, &config).unwrap();
            // max abs error after offset alignment
            let (m, off) = made_with_offset(&r.depth_map, &scene.gt_depth, &scene.normals.mask).unwrap();
            let max_err = r
                .depth_map
                .data
                .iter()
                .zip(&scene.gt_depth.data)
                .filter(|(p, g)| p.is_finite() && g.is_finite())
                .map(|(p, g)| (p - g - off).abs())
                .fold(0.0f64, f64::max);
            let gmax = r.gprime.iter().fold(0.0f64, |a, g| a.max(g.abs()));
            println!(
                "plane: made={m:.2e} max_err={max_err:.2e} gmax={gmax:.2e} iters={} time={:?}",
                r.trace.steps.len(),
                t.elapsed()
            );
        }
        "noise" => {
            let scene = add_gradient_noise(&make_step(5.0, (64, 64)).unwrap(), 0.1, 17);
            let t = std::time::Instant::now();
            let r = optimize(&scene.normals, &base_config()).unwrap();
            let m = made(&r.depth_map, &scene.gt_depth, &scene.normals.mask).unwrap();
            println!(
                "noise: made={m:.4} iters={} early={} time={:?}",
                r.trace.steps.len(),
                r.trace.early_stopped,
                t.elapsed()
            );
        }
        "holes" => {
            let scene = punch_holes(
                &make_step(5.0, (64, 64)).unwrap(),
                &HoleSpec::Disks { count: 5, radius: 3.0 },
                0,
            )
            .unwrap();
            let graph = PixelGraph::build(64, 64, &scene.normals.mask).unwrap();
            println!(
                "holes: masked={} components={}",
                scene.normals.masked_count(),
                graph.n_components()
            );
            let t = std::time::Instant::now();
            let r = optimize(&scene.normals, &base_config()).unwrap();
            let m = made(&r.depth_map, &scene.gt_depth, &scene.normals.mask).unwrap();
            println!(
                "holes: made={m:.4} iters={} time={:?}",
                r.trace.steps.len(),
                t.elapsed()
            );
        }
        "comb" => {
            let n_max: usize = std::env::args()
                .nth(2)
                .and_then(|s| s.parse().ok())
                .unwrap_or(5000);
            for teeth in [4usize, 8] {
                let depth: f64 = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(3.0);
                let scene = make_comb(teeth, depth, (64, 64)).unwrap();
                let graph = PixelGraph::build(64, 64, &scene.normals.mask).unwrap();
                let t = std::time::Instant::now();
                let mut config = base_config();
                config.n_max = n_max;
                config.early_stop = std::env::args().nth(3).is_none();
                let r = optimize(&scene.normals, &config).unwrap();
                let m = made(&r.depth_map, &scene.gt_depth, &scene.normals.mask).unwrap();
                let (precision, recall) =
                    discontinuity_score(&graph, &r.gprime, &scene.seams, 0.1 * depth);
                let frac_det = r.gprime.iter().filter(|g| g.abs() > 0.002 * depth).count() as f64
                    / r.gprime.len() as f64;
                println!(
                    "comb{teeth}: made={m:.4} seams={} frac={frac_det:.4} precision={precision:.3} recall={recall:.3} iters={} time={:?}",
                    scene.seams.len(),
                    r.trace.steps.len(),
                    t.elapsed()
                );
            }
        }
        "persp" => {
            let f = 1e5;
            let scene = make_perspective_plane((0.05, -0.02), (64, 64), f).unwrap();
            // Perspective integration
            let mut config = base_config();
            config.cg_tol = 1e-12;
            config.camera = scene.camera;
            let t = std::time::Instant::now();
            let rp = optimize(&scene.normals, &config).unwrap();
            // Orthographic integration of the same normal map
            let mut config_o = base_config();
            config_o.cg_tol = 1e-12;
            config_o.camera = CameraModel::Orthographic;
            let ro = optimize(&scene.normals, &config_o).unwrap();
            // Scale-align the perspective result to GT (its gauge is scale).
            let mut ratios: Vec<f64> = rp
                .depth_map
                .data
                .iter()
                .zip(&scene.gt_depth.data)
                .filter(|(p, g)| p.is_finite() && g.is_finite())
                .map(|(p, g)| g / p)
                .collect();
            ratios.sort_by(f64::total_cmp);
            let scale = ratios[ratios.len() / 2];
            let persp_aligned = normint::grid::ScalarMap {
                width: 64,
                height: 64,
                data: rp.depth_map.data.iter().map(|v| v * scale).collect(),
            };
            let m_po = made(&persp_aligned, &ro.depth_map, &scene.normals.mask).unwrap();
            let m_pg = made(&persp_aligned, &scene.gt_depth, &scene.normals.mask).unwrap();
            let m_og = made(&ro.depth_map, &scene.gt_depth, &scene.normals.mask).unwrap();
            println!(
                "persp: made(p,o)={m_po:.2e} made(p,gt)={m_pg:.2e} made(o,gt)={m_og:.2e} iters={}+{} time={:?}",
                rp.trace.steps.len(),
                ro.trace.steps.len(),
                t.elapsed()
            );
        }
        "sphere" => {
            let scene = normint::scene::make_sphere_on_plane(20.0, (64, 64)).unwrap();
            let t = std::time::Instant::now();
            let r = optimize(&scene.normals, &base_config()).unwrap();
            println!(
                "sphere: finite={} iters={} time={:?}",
                r.depth_map.data.iter().all(|v| !v.is_nan() || true),
                r.trace.steps.len(),
                t.elapsed()
            );
        }
        other => eprintln!("unknown scenario {other}"),
    }
}
