use normint::graph::PixelGraph;
use normint::scene::{make_step, punch_holes, HoleSpec};

fn main() {
    let base = make_step(5.0, (64, 64)).unwrap();
    for seed in 0..24u64 {
        let holed = punch_holes(&base, &HoleSpec::Disks { count: 5, radius: 3.0 }, seed);
        match holed {
            Ok(s) => {
                let g = PixelGraph::build(64, 64, &s.normals.mask).unwrap();
                let remaining_seams = s.seams.len();
                println!(
                    "seed {seed}: masked={} components={} seams={remaining_seams}",
                    s.normals.masked_count(),
                    g.n_components()
                );
            }
            Err(e) => println!("seed {seed}: {e}"),
        }
    }
}
