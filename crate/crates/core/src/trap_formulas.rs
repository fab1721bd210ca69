//! Closed-form ground truth for the simulators.
//!
//! All functions are pure. An infinite mean waiting time is represented by
//! `f64::INFINITY` and yields speed zero.

use crate::error::{invalid, Result};

/// Bias, trap-length rate, backbone-exit probability and (optionally) the
/// critical bias of the drift-dependent Pareto family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub lambda: f64,
    pub alpha: f64,
    pub q: f64,
    pub lambda_crit: Option<f64>,
}

impl ModelParams {
    pub fn new(lambda: f64, alpha: f64, q: f64) -> Result<Self> {
        let p = ModelParams {
            lambda,
            alpha,
            q,
            lambda_crit: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(invalid("lambda", format!("must be > 0, got {}", self.lambda)));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(invalid("alpha", format!("must be > 0, got {}", self.alpha)));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(invalid("q", format!("must lie in (0,1), got {}", self.q)));
        }
        if let Some(c) = self.lambda_crit {
            if !(c.is_finite() && c > 0.0) {
                return Err(invalid("lambda_crit", format!("must be > 0, got {c}")));
            }
        }
        Ok(())
    }

    /// Geometric trap lengths give a finite mean holding time iff `λ < α/2`.
    pub fn positive_speed_regime(&self) -> bool {
        self.lambda < self.alpha / 2.0
    }
}

/// Right-step probability `e^λ / (e^λ + e^{-λ})`.
#[inline]
pub fn p_right(lambda: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * lambda).exp())
}

/// Left-step probability `e^{-λ} / (e^λ + e^{-λ})`.
#[inline]
pub fn p_left(lambda: f64) -> f64 {
    1.0 / (1.0 + (2.0 * lambda).exp())
}

/// Probability that the biased walk never returns to its start: `2p_λ − 1 = tanh λ`.
pub fn p_esc(lambda: f64) -> f64 {
    lambda.tanh()
}

/// Asymptotic speed `p_esc(λ) / E[w₀]`, zero for an infinite mean.
pub fn speed_theorem(lambda: f64, mean_w: f64) -> f64 {
    if mean_w.is_infinite() {
        0.0
    } else {
        p_esc(lambda) / mean_w
    }
}

/// `E[t_ℓ] = 2 (e^{2λℓ} − 1) / (e^{2λ} − 1)`: mean length of one trap
/// excursion, counting the step into the trap.
pub fn mean_excursion(len: u32, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 2.0 * len as f64;
    }
    2.0 * (2.0 * lambda * len as f64).exp_m1() / (2.0 * lambda).exp_m1()
}

/// `S̄_ℓ = 1 + ((1−q)/q) E[t_ℓ]`, with `S̄₀ = 1`.
pub fn mean_sojourn(len: u32, lambda: f64, q: f64) -> f64 {
    if len == 0 {
        1.0
    } else {
        1.0 + (1.0 - q) / q * mean_excursion(len, lambda)
    }
}

/// `e^α − e^{2λ}` evaluated without cancellation near `λ = α/2`.
fn exp_gap(lambda: f64, alpha: f64) -> f64 {
    (2.0 * lambda).exp() * (alpha - 2.0 * lambda).exp_m1()
}

/// `E[w₀]` for the comb with geometric trap lengths, `+∞` when `λ ≥ α/2`.
pub fn comb_mean_w(lambda: f64, alpha: f64, q: f64) -> f64 {
    if lambda >= alpha / 2.0 {
        return f64::INFINITY;
    }
    let c = 2.0 * (1.0 - q) / q;
    1.0 + c / exp_gap(lambda, alpha)
}

/// Comb-graph speed with geometric trap lengths.
pub fn speed_example1(lambda: f64, alpha: f64, q: f64) -> f64 {
    if lambda >= alpha / 2.0 {
        return 0.0;
    }
    let gap = exp_gap(lambda, alpha);
    p_esc(lambda) * gap / (gap + 2.0 * (1.0 - q) / q)
}

/// Mean of the Pareto law `P(w ≥ t) = t^{−α}`, `t ≥ 1`.
pub fn pareto_mean(alpha: f64) -> f64 {
    if alpha > 1.0 {
        alpha / (alpha - 1.0)
    } else {
        f64::INFINITY
    }
}

/// Bouchaud speed `tanh(λ) (α − 1)⁺ / α`.
pub fn speed_example2(lambda: f64, alpha: f64) -> f64 {
    p_esc(lambda) * (alpha - 1.0).max(0.0) / alpha
}

/// Bouchaud speed with `α = λ_crit / λ`: `tanh(λ) (λ_crit − λ)⁺ / λ_crit`.
pub fn speed_example2_crit(lambda: f64, lambda_crit: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    p_esc(lambda) * (lambda_crit - lambda).max(0.0) / lambda_crit
}

/// `P(L = 0) + E[L]` for geometric `L` with rate `α`: `1 + e^{−2α}/(1 − e^{−α})`.
pub fn geometric_p0_plus_mean(alpha: f64) -> f64 {
    1.0 + (-2.0 * alpha).exp() / -(-alpha).exp_m1()
}

/// `E[w₀]` for the ladder with horizontal traps, `+∞` when `λ ≥ α/2`.
pub fn ladder_mean_w(lambda: f64, alpha: f64, q: f64) -> f64 {
    if lambda >= alpha / 2.0 {
        return f64::INFINITY;
    }
    let c = 2.0 * (1.0 - q) / q;
    1.0 + c / (exp_gap(lambda, alpha) * geometric_p0_plus_mean(alpha))
}

pub fn speed_example3(lambda: f64, alpha: f64, q: f64) -> f64 {
    speed_theorem(lambda, ladder_mean_w(lambda, alpha, q))
}

/// `E[N₀] = 1 / p_esc(λ)`, mean number of visits to a site.
pub fn expected_visits(lambda: f64) -> f64 {
    1.0 / p_esc(lambda)
}

/// `E[Z₀] = E[N₀] E[w₀]`, mean total time spent at a site.
pub fn expected_site_time(lambda: f64, mean_w: f64) -> f64 {
    expected_visits(lambda) * mean_w
}
