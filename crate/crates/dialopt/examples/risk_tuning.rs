//! Calibrating a binary scorer without labels.
//!
//! Synthesizes a heavily imbalanced two-class feature set (99% positive, 1%
//! rare negative, matching the default mixture priors), rotates the true
//! separating weights to get a deliberately misaligned starting scorer, then
//! lets coordinate descent on the closed-form expected hinge risk pull the
//! weights back. Labels are only used afterwards, to report what happened to
//! the macro F1.
//!
//! ```text
//! cargo run --release --example risk_tuning
//! ```

use dialopt::riskmin::{margins, sample_skewness, tune_weights, LinearScorer, RiskConfig};
use dialopt::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two Gaussian blobs in the plane; class 0 is the rare one.
fn synthesize(n: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = u8::from(rng.gen::<f64>() >= 0.01);
        let c = if y == 1 { 1.0 } else { -1.0 };
        features.push(vec![
            c * 1.5 + rng.gen_range(-0.6..0.6),
            c * 0.9 + rng.gen_range(-0.6..0.6),
        ]);
        labels.push(y);
    }
    (features, labels)
}

fn macro_f1(scorer: &LinearScorer, features: &[Vec<f64>], labels: &[u8]) -> Result<f64> {
    let ms = margins(scorer, features)?;
    let mut f1 = 0.0;
    for class in [0u8, 1] {
        let (mut tp, mut fp, mut fnn) = (0.0, 0.0, 0.0);
        for (m, &y) in ms.iter().zip(labels) {
            let predicted = u8::from(*m > 0.0);
            match (predicted == class, y == class) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fnn += 1.0,
                (false, false) => {}
            }
        }
        let denom = 2.0 * tp + fp + fnn;
        f1 += if denom > 0.0 { 2.0 * tp / denom } else { 0.0 };
    }
    Ok(f1 / 2.0)
}

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (features, labels) = synthesize(2000, &mut rng);

    // The aligned scorer would be (1.0, 0.6); start 75 degrees off instead.
    let aligned = [1.0, 0.6];
    let theta: f64 = 75f64.to_radians();
    let rotated = vec![
        aligned[0] * theta.cos() - aligned[1] * theta.sin(),
        aligned[0] * theta.sin() + aligned[1] * theta.cos(),
    ];
    let start = LinearScorer::new(vec![0.0; 2], rotated)?;

    let ms = margins(&start, &features)?;
    println!("margin skewness before tuning: {:+.3}", sample_skewness(&ms));

    let cfg = RiskConfig { iterations: 600, ..RiskConfig::default() };
    let tuned = tune_weights(&start, &features, &cfg, 42)?;
    println!(
        "risk: {:.4} -> {:.4} over {} iterations",
        tuned.initial_risk,
        tuned.final_risk,
        tuned.trace.len()
    );

    let before = macro_f1(&start, &features, &labels)?;
    let after = macro_f1(&tuned.scorer, &features, &labels)?;
    println!("macro F1 against the withheld labels: {before:.3} -> {after:.3}");
    Ok(())
}
