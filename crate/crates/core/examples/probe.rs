//! Scratch driver for watching the optimization on the synthetic scenes.

use normint::graph::{average_to_depth_map, Axis, PixelGraph};
use normint::metrics::{discontinuity_score, made};
use normint::optimize::{nonzero_fraction, optimize, SolverConfig};
use normint::scene::make_step;
use normint::solver::poisson_baseline;

fn main() {
    let h = 5.0;
    let scene = make_step(h, (64, 64)).unwrap();
    let graph = PixelGraph::build(64, 64, &scene.normals.mask).unwrap();

    let t0 = std::time::Instant::now();
    let (pd, prep) = poisson_baseline(&scene.normals, &scene.camera, &graph).unwrap();
    let pmap = average_to_depth_map(&graph, &pd);
    let pmade = made(&pmap, &scene.gt_depth, &scene.normals.mask).unwrap();
    println!(
        "poisson: made={pmade:.4} cg_iters={} rel={:.2e} time={:?}",
        prep.iterations, prep.relative_residual, t0.elapsed()
    );

    let mut config = SolverConfig::default();
    config.early_stop = std::env::args().nth(2).is_none();
    let n_max = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(5000);
    config.n_max = n_max;

    let t0 = std::time::Instant::now();
    let result = optimize(&scene.normals, &config).unwrap();
    let omade = made(&result.depth_map, &scene.gt_depth, &scene.normals.mask).unwrap();
    let (precision, recall) =
        discontinuity_score(&graph, &result.gprime, &scene.seams, 0.1 * h);
    println!(
        "optimize: made={omade:.5} iters={} early={} frac={:.4} precision={precision:.3} recall={recall:.3} time={:?}",
        result.trace.steps.len(),
        result.trace.early_stopped,
        nonzero_fraction(&result.gprime),
        t0.elapsed()
    );
    for (i, s) in result.trace.steps.iter().enumerate() {
        if i % 50 == 0 || i + 1 == result.trace.steps.len() {
            println!(
                "  n={:4} lambda={:.1} e_v={:.6e} e_disc={:.6e} frac={:.4} cg={} ",
                i + 1,
                s.lambda,
                s.e_v,
                s.e_disc,
                s.nonzero_gprime_fraction,
                s.cg.iterations
            );
        }
    }

    // Seam-column state: top-class x-aux edges at pairs (30,31), (31,32), (32,33).
    println!("row:  D(30|31)  g(30|31) | D(31|32)  g(31|32) | D(32|33)  g(32|33) | offset");
    for row in [0usize, 10, 20, 30, 40, 42, 44, 46, 50, 60] {
        let mut line = format!("{row:3}: ");
        for left in [30usize, 31, 32] {
            let mut shown = false;
            for (i, e) in graph.aux_edges.iter().enumerate() {
                if e.axis != Axis::X {
                    continue;
                }
                let (xa, ya) = graph.pixel_position(e.pixels.0);
                if (xa, ya) != (left, row) {
                    continue;
                }
                let d = result.depth.values[e.head] - result.depth.values[e.tail];
                line.push_str(&format!("{d:+8.3} {:+8.3} | ", result.gprime[i]));
                shown = true;
                break;
            }
            if !shown {
                line.push_str("    -        -    | ");
            }
        }
        let off = result.depth_map.at(45, row) - result.depth_map.at(18, row);
        line.push_str(&format!("{off:+7.3}"));
        println!("{line}");
    }
    // Histogram of |g'| on true seam edges vs elsewhere.
    let mut seam_gs = Vec::new();
    let mut other_max: f64 = 0.0;
    for (i, e) in graph.aux_edges.iter().enumerate() {
        let (xa, ya) = graph.pixel_position(e.pixels.0);
        let (xb, _) = graph.pixel_position(e.pixels.1);
        let on_seam = e.axis == Axis::X
            && scene
                .seams
                .iter()
                .any(|s| (s.a.0, s.a.1) == (xa, ya) && s.b.0 == xb);
        if on_seam {
            seam_gs.push(result.gprime[i]);
        } else {
            other_max = other_max.max(result.gprime[i].abs());
        }
    }
    let detected = seam_gs.iter().filter(|g| g.abs() > 0.1 * h).count();
    println!(
        "seam edges: {} of {} above 0.1h; max elsewhere {:.3}",
        detected,
        seam_gs.len(),
        other_max
    );
    quantiles("final |g'|", &result.gprime);
    let poisson_jumps: Vec<f64> = (0..graph.aux_edges.len())
        .map(|i| {
            normint::graph::directional_derivative(&graph, &pd, normint::graph::EdgeId::Aux(i))
        })
        .collect();
    quantiles("poisson |D|", &poisson_jumps);
    for t in [1e-6, 1e-3, 0.01, 0.05, 0.5] {
        let f_g = result.gprime.iter().filter(|g| g.abs() > t).count() as f64
            / result.gprime.len() as f64;
        let f_p = poisson_jumps.iter().filter(|d| d.abs() > t).count() as f64
            / poisson_jumps.len() as f64;
        println!("threshold {t:.0e}: g' frac {f_g:.4}  poisson-D frac {f_p:.4}");
    }
}

#[allow(dead_code)]
fn quantiles(label: &str, values: &[f64]) {
    let mut v: Vec<f64> = values.iter().map(|x| x.abs()).collect();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| v[((v.len() - 1) as f64 * p) as usize];
    println!(
        "{label}: q50={:.2e} q90={:.2e} q95={:.2e} q99={:.2e} max={:.2e}",
        q(0.5),
        q(0.9),
        q(0.95),
        q(0.99),
        q(1.0)
    );
}
