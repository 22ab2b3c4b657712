use gedi::matrix::Matrix;
use gedi::objectives::{sinkhorn_assign, SinkhornConfig};
use gedi::rng::seeded;
use rand::Rng as _;
use std::time::Instant;

fn main() {
    let mut rng = seeded(0);
    // Realistic training logits: unit-ish z dot U(~N(0,0.1)) / tau(0.1)
    for scale in [1.0, 3.0, 10.0, 30.0] {
        let mut logits = Matrix::zeros(400, 2);
        for v in logits.data_mut() {
            *v = rng.gen_range(-1.0..1.0) * scale;
        }
        let t = Instant::now();
        let reps = 20;
        for _ in 0..reps {
            let _ = sinkhorn_assign(&logits, &SinkhornConfig::default()).unwrap();
        }
        println!("scale {scale}: {:.3} ms/call", t.elapsed().as_secs_f64() / reps as f64 * 1e3);
    }
}
