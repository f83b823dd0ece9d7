//! Random tiny SVM instances and independent KKT checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spamsift_core::svm::{LabeledExample, SvmModel};
use spamsift_core::{FeatureVector, Fingerprint, Label};

pub const FP: Fingerprint = Fingerprint(0x5eed);

#[derive(Debug, Clone)]
pub struct Instance {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    pub c: f64,
    pub separable: bool,
}

impl Instance {
    pub fn dim(&self) -> usize {
        self.xs[0].len()
    }

    pub fn examples(&self) -> Vec<LabeledExample> {
        self.xs
            .iter()
            .zip(&self.ys)
            .enumerate()
            .map(|(i, (x, &y))| {
                LabeledExample::new(format!("e{i:02}"), FeatureVector::from_dense(x, FP), Label::from_score(y))
            })
            .collect()
    }
}

/// `n` in 2..=12, `d` in 1..=4, both classes present. Separable instances
/// are drawn with a gap around a random hyperplane; the others overlap.
pub fn random_instance(rng: &mut ChaCha8Rng, separable: bool, c: f64) -> Instance {
    let n = rng.gen_range(2..=12);
    let d = rng.gen_range(1..=4);
    let normal: Vec<f64> = loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nrm > 0.2 {
            break v.iter().map(|x| x / nrm).collect();
        }
    };
    let offset = rng.gen_range(-0.5..0.5);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let y = if i % 2 == 0 { 1.0 } else { -1.0 };
        let mut x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let s: f64 = x.iter().zip(&normal).map(|(a, b)| a * b).sum::<f64>() - offset;
        // shift along the normal so that the signed distance has the right side
        let target = if separable {
            y * rng.gen_range(0.3..1.5)
        } else {
            y * rng.gen_range(-0.6..1.2)
        };
        for k in 0..d {
            x[k] += (target - s) * normal[k];
        }
        xs.push(x);
        ys.push(y);
    }
    Instance { xs, ys, c, separable }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Worst violation of the three complementary-slackness clauses, measured
/// from scratch against `y f(x) = y (w.x - b)`.
pub fn kkt_violation(model: &SvmModel, examples: &[LabeledExample]) -> f64 {
    let c = model.config().c;
    let zero = model.config().alpha_zero_threshold();
    let mut worst: f64 = 0.0;
    for e in examples {
        let a = model.alpha_of(&e.id).unwrap();
        let yf = e.y.sign() * model.decision_value(&e.x).unwrap();
        let v = if a <= zero {
            (1.0 - yf).max(0.0)
        } else if a >= c {
            (yf - 1.0).max(0.0)
        } else {
            (yf - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// `|sum a_i y_i|` and `max_k |w_k - sum a_i y_i x_ik|`.
pub fn dual_identities(model: &SvmModel, examples: &[LabeledExample]) -> (f64, f64) {
    let d = model.dim();
    let mut w = vec![0.0; d];
    let mut balance = 0.0;
    for e in examples {
        let a = model.alpha_of(&e.id).unwrap();
        balance += a * e.y.sign();
        for &(k, v) in e.x.entries() {
            w[k] += a * e.y.sign() * v;
        }
    }
    let recon = w
        .iter()
        .zip(model.weights())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    (balance.abs(), recon)
}
