use crate::autodiff::{Graph, Matrix, Var};
use crate::error::{Error, Result};

/// Probabilities enter the binary cross-entropy as `π(1 - 2ε) + ε`.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub critic: f64,
    pub entropy: f64,
    pub template: f64,
    pub object: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            critic: 0.5,
            entropy: 0.01,
            template: 1.0,
            object: 1.0,
        }
    }
}

/// `Q = r + γ v_next` (no bootstrap when `done`), `A = Q - v`.
pub fn compute_q_advantage(r: f64, v_next: f64, v: f64, gamma: f64, done: bool) -> (f64, f64) {
    let bootstrap = if done { 0.0 } else { gamma * v_next };
    (r + bootstrap, (r - v) + bootstrap)
}

pub fn total_loss(pi: f64, critic: f64, entropy: f64, template: f64, object: f64, w: &LossWeights) -> f64 {
    pi + w.critic * critic + w.entropy * entropy + w.template * template + w.object * object
}

/// Mean binary cross-entropy between a `1 x n` probability row and `labels`.
pub fn bce(g: &mut Graph<'_>, probs: Var, labels: &[f64]) -> Result<Var> {
    let (r, n) = g.shape(probs);
    if r != 1 || n != labels.len() || n == 0 {
        return Err(Error::Shape {
            kind: "bce",
            lhs: (r, n),
            rhs: (1, labels.len()),
        });
    }
    let squashed = g.scalar_mul(probs, 1.0 - 2.0 * BCE_EPS)?;
    let eps = g.constant(Matrix::filled(1, n, BCE_EPS));
    let p = g.add(squashed, eps)?;
    if let Some(&bad) = g.value(p).data().iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
        return Err(Error::Probability(bad));
    }
    let neg = g.scalar_mul(p, -1.0)?;
    let ones = g.constant(Matrix::filled(1, n, 1.0));
    let q = g.add(ones, neg)?;
    let log_p = g.log(p)?;
    let log_q = g.log(q)?;
    let y = g.constant(Matrix::row(labels));
    let not_y = g.constant(Matrix::row(&labels.iter().map(|y| 1.0 - y).collect::<Vec<_>>()));
    let a = g.mul(y, log_p)?;
    let b = g.mul(not_y, log_q)?;
    let sum = g.add(a, b)?;
    let total = g.sum_all(sum)?;
    g.scalar_mul(total, -1.0 / n as f64)
}

/// Plain-value mirror of [`bce`].
pub fn bce_value(probs: &[f64], labels: &[f64]) -> f64 {
    let n = probs.len() as f64;
    -probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p * (1.0 - 2.0 * BCE_EPS) + BCE_EPS;
            y * p.ln() + (1.0 - y) * (1.0 - p).ln()
        })
        .sum::<f64>()
        / n
}

/// `Σ p ln p`, with `0 ln 0 = 0`.
pub fn neg_entropy(probs: &[f64]) -> f64 {
    probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum()
}

/// Per-transition loss terms as plain values.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossTerms {
    pub policy: f64,
    pub critic: f64,
    pub entropy: f64,
    pub template: f64,
    pub object: f64,
}

impl LossTerms {
    pub fn total(&self, w: &LossWeights) -> f64 {
        total_loss(self.policy, self.critic, self.entropy, self.template, self.object, w)
    }

    pub fn add(&mut self, other: &LossTerms) {
        self.policy += other.policy;
        self.critic += other.critic;
        self.entropy += other.entropy;
        self.template += other.template;
        self.object += other.object;
    }

    pub fn scale(&mut self, s: f64) {
        self.policy *= s;
        self.critic *= s;
        self.entropy *= s;
        self.template *= s;
        self.object *= s;
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, v) in [
            ("policy", self.policy),
            ("critic", self.critic),
            ("entropy", self.entropy),
            ("template", self.template),
            ("object", self.object),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFiniteLoss(name));
            }
        }
        Ok(())
    }
}
