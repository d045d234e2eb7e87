//! Pairwise Circle loss over a similarity matrix.
//!
//! With α_p = [1 + m − s_p]₊, α_n = [s_n + m]₊, Δ_p = 1 − m and Δ_n = m:
//!
//! L = log(1 + Σₙ exp(γ α_n (s_n − Δ_n)) · Σₚ exp(−γ α_p (s_p − Δ_p)))
//!
//! summed over unordered pairs i < j. L = 0 when either pair set is empty.

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Exponent of one pair and its derivative with respect to the similarity.
fn pair_term(s: f64, positive: bool, gamma: f64, margin: f64) -> (f64, f64) {
    if positive {
        let alpha = 1.0 + margin - s;
        if alpha <= 0.0 {
            return (0.0, 0.0);
        }
        (-gamma * alpha * (s - (1.0 - margin)), -gamma * (2.0 - 2.0 * s))
    } else {
        let alpha = s + margin;
        if alpha <= 0.0 {
            return (0.0, 0.0);
        }
        (gamma * alpha * (s - margin), gamma * 2.0 * s)
    }
}

pub fn circle_loss(s: &[Vec<f64>], same: &[Vec<bool>], gamma: f64, margin: f64) -> f64 {
    circle_loss_grad(s, same, gamma, margin).0
}

/// Loss from explicit positive and negative similarity lists.
pub fn circle_loss_pairs(positives: &[f64], negatives: &[f64], gamma: f64, margin: f64) -> f64 {
    if positives.is_empty() || negatives.is_empty() {
        return 0.0;
    }
    let zp: Vec<f64> = positives.iter().map(|&s| pair_term(s, true, gamma, margin).0).collect();
    let zn: Vec<f64> = negatives.iter().map(|&s| pair_term(s, false, gamma, margin).0).collect();
    softplus(log_sum_exp(&zp) + log_sum_exp(&zn))
}

/// Loss and ∂L/∂Sᵢⱼ, stored at `[i][j]` for `i < j` (zero elsewhere).
pub fn circle_loss_grad(s: &[Vec<f64>], same: &[Vec<bool>], gamma: f64, margin: f64) -> (f64, Vec<Vec<f64>>) {
    let n = s.len();
    let mut grad = vec![vec![0.0; n]; n];
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for i in 0..n {
        for j in i + 1..n {
            let (z, dz) = pair_term(s[i][j], same[i][j], gamma, margin);
            if same[i][j] { &mut pos } else { &mut neg }.push((i, j, z, dz));
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return (0.0, grad);
    }
    let zp: Vec<f64> = pos.iter().map(|t| t.2).collect();
    let zn: Vec<f64> = neg.iter().map(|t| t.2).collect();
    let (lp, ln) = (log_sum_exp(&zp), log_sum_exp(&zn));
    let x = lp + ln;
    let outer = sigmoid(x);
    for (set, lse) in [(&pos, lp), (&neg, ln)] {
        for &(i, j, z, dz) in set {
            grad[i][j] = outer * (z - lse).exp() * dz;
        }
    }
    (softplus(x), grad)
}
