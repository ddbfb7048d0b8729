//! Shared oracles for the integration suite, written independently of the
//! library internals: linear solves by Gaussian elimination, optimal values
//! by brute-force policy enumeration, a chi-square tail for the sampling
//! checks, and a Monte-Carlo risk estimator with its own normal sampler.
//! When a test disagrees with the library, exactly one side is wrong.

#![allow(dead_code)]

use dialopt::mdp::Mdp;
use dialopt::riskmin::ScoreGmm;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Solves `A x = b` by Gaussian elimination with partial pivoting. Panics on
/// a singular system; the matrices here are strictly diagonally dominant.
pub fn linsolve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        assert!(a[col][col].abs() > 1e-12, "singular system");
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Exact discounted value of a fixed policy: solves `(I - gamma P) v = r`
/// directly instead of iterating.
pub fn exact_policy_value(mdp: &Mdp, actions: &[usize]) -> Vec<f64> {
    let n = mdp.n_states();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for s in 0..n {
        a[s][s] += 1.0;
        let row = mdp.transition_row(s, actions[s]).expect("policy picks a valid action");
        for &(to, p) in row {
            a[s][to] -= mdp.gamma() * p;
        }
        b[s] = mdp.reward(s);
    }
    linsolve(a, b)
}

/// Every deterministic policy of a small MDP, as action-id vectors in
/// state-major order.
pub fn all_policies(mdp: &Mdp) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for s in 0..mdp.n_states() {
        let mut next = Vec::with_capacity(out.len() * mdp.actions(s).len());
        for partial in &out {
            for &a in mdp.actions(s) {
                let mut ext = partial.clone();
                ext.push(a);
                next.push(ext);
            }
        }
        out = next;
    }
    out
}

/// Optimal values by brute force: the pointwise maximum over the exact
/// values of every deterministic policy. Exponential in the state count,
/// which is the point; only use it on tiny MDPs.
pub fn enumerated_optimal_values(mdp: &Mdp) -> Vec<f64> {
    let mut best = vec![f64::NEG_INFINITY; mdp.n_states()];
    for policy in all_policies(mdp) {
        for (b, x) in best.iter_mut().zip(exact_policy_value(mdp, &policy)) {
            if x > *b {
                *b = x;
            }
        }
    }
    best
}

/// One-step lookahead values `q(s, a) = r(s) + gamma * sum_j p(j | s, a) v(j)`.
pub fn lookahead_q(mdp: &Mdp, s: usize, a: usize, v: &[f64]) -> f64 {
    let row = mdp.transition_row(s, a).expect("valid action");
    mdp.reward(s) + mdp.gamma() * row.iter().map(|&(to, p)| p * v[to]).sum::<f64>()
}

/// Greedy policy against a value vector, the lowest action id winning ties.
pub fn greedy_against(mdp: &Mdp, v: &[f64]) -> Vec<usize> {
    (0..mdp.n_states())
        .map(|s| {
            let mut best_a = mdp.actions(s)[0];
            let mut best_q = f64::NEG_INFINITY;
            for &a in mdp.actions(s) {
                let q = lookahead_q(mdp, s, a, v);
                if q > best_q {
                    best_q = q;
                    best_a = a;
                }
            }
            best_a
        })
        .collect()
}

// ---------------------------------------------------------------------------
// statistics

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample mean and the standard error of that mean (n - 1 variance).
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Mean and standard error estimated from `n_batches` contiguous batch
/// means, which absorbs serial correlation the plain SE would miss.
pub fn batch_means_se(xs: &[f64], n_batches: usize) -> (f64, f64) {
    assert!(n_batches >= 2 && xs.len() >= n_batches);
    let len = xs.len() / n_batches;
    let batches: Vec<f64> = (0..n_batches).map(|b| mean(&xs[b * len..(b + 1) * len])).collect();
    mean_and_se(&batches)
}

/// Median, averaging the middle pair on even counts.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

// ---------------------------------------------------------------------------
// chi-square tail

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..500 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-15 {
            break;
        }
    }
    sum * (a * x.ln() - x - libm::lgamma(a)).exp()
}

fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    // Lentz's algorithm on the standard continued fraction.
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-15 {
            break;
        }
    }
    (a * x.ln() - x - libm::lgamma(a)).exp() * h
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

/// Upper-tail probability of a chi-square statistic with `dof` degrees of
/// freedom.
pub fn chi_square_p(stat: f64, dof: usize) -> f64 {
    gamma_q(dof as f64 / 2.0, stat / 2.0)
}

/// Pearson statistic of observed counts against expected probabilities,
/// with the p-value at `k - 1` degrees of freedom.
pub fn pearson_chi_square(observed: &[usize], expected_probs: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), expected_probs.len());
    let total: usize = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(expected_probs)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e) * (o as f64 - e) / e
        })
        .sum();
    (stat, chi_square_p(stat, observed.len() - 1))
}

// ---------------------------------------------------------------------------
// Monte-Carlo risk oracle

/// Monte-Carlo estimate of the mixture hinge risk together with its
/// standard error. Samples with `rand_distr`'s ziggurat normal, so the
/// oracle shares neither formulas nor sampling code with the library.
pub fn mc_hinge_risk(gmm: &ScoreGmm, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let low = Normal::new(gmm.mu0, gmm.sigma0).unwrap();
    let high = Normal::new(gmm.mu1, gmm.sigma1).unwrap();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let m0: f64 = low.sample(&mut rng);
        let m1: f64 = high.sample(&mut rng);
        let x = gmm.prior1 * (1.0 - m1).max(0.0) + gmm.prior0 * (1.0 + m0).max(0.0);
        sum += x;
        sum_sq += x * x;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Random dense-ish MDP with random rewards on a coarse grid, for oracle
/// comparisons. Grid rewards keep optimal-policy ties either exact or far
/// apart, so argmax comparisons across implementations stay meaningful.
pub fn random_rewarded_mdp(
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> Mdp {
    let successors = rng.gen_range(1..=n_states.min(3));
    let mdp = dialopt::mdp::sparse_random_mdp(n_states, n_actions, successors, gamma, rng);
    let rewards: Vec<f64> =
        (0..n_states).map(|_| (rng.gen_range(-4i32..=4) as f64) * 0.25).collect();
    mdp.with_rewards(&rewards).expect("grid rewards stay inside the box")
}
