//! Sojourn-time samplers `τ` for one visit to a site.

use crate::environment::SiteTrap;
use crate::error::{invalid, Result};
use crate::rng_streams::RandomStream;
use crate::trap_formulas::p_right;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HoldingTimeModel {
    /// `τ = w · e` with `e` a unit exponential (Bouchaud).
    Exponential,
    /// `τ = S_ℓ`, one backbone step plus a geometric number of explicit
    /// trap excursions.
    TrapCompound { lambda: f64, q: f64 },
    /// `τ = w`.
    Deterministic,
}

impl HoldingTimeModel {
    pub fn trap_compound(lambda: f64, q: f64) -> Result<Self> {
        check_lambda(lambda)?;
        check_q(q)?;
        Ok(HoldingTimeModel::TrapCompound { lambda, q })
    }

    pub fn name(&self) -> &'static str {
        match self {
            HoldingTimeModel::Exponential => "exponential",
            HoldingTimeModel::TrapCompound { .. } => "trap_compound",
            HoldingTimeModel::Deterministic => "deterministic",
        }
    }

    /// A sampler with the per-model constants precomputed.
    pub fn sampler(&self) -> HoldingSampler {
        match *self {
            HoldingTimeModel::TrapCompound { lambda, q } => HoldingSampler {
                model: *self,
                p_deeper: p_right(lambda),
                q,
            },
            _ => HoldingSampler {
                model: *self,
                p_deeper: 0.5,
                q: 1.0,
            },
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct HoldingSampler {
    model: HoldingTimeModel,
    p_deeper: f64,
    q: f64,
}

impl HoldingSampler {
    /// Draws `τ` for one visit to `site`. The mean is `site.w`.
    #[inline]
    pub fn sample(&self, site: SiteTrap, stream: &mut RandomStream) -> f64 {
        match self.model {
            HoldingTimeModel::Exponential => -site.w * stream.next_uniform().ln(),
            HoldingTimeModel::Deterministic => site.w,
            HoldingTimeModel::TrapCompound { .. } => {
                compound_sojourn(site.trap_len, self.p_deeper, self.q, stream)
            }
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(invalid("lambda", format!("must be > 0, got {lambda}")))
    }
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(invalid("q", format!("must lie in (0,1), got {q}")))
    }
}

/// `τ = −r ln U`, exponential with mean `r`.
pub fn sample_exponential(r: f64, stream: &mut RandomStream) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(invalid("r", format!("mean must be > 0, got {r}")));
    }
    Ok(-r * stream.next_uniform().ln())
}

/// Length of one excursion into a trap of depth `len`, counting the step in:
/// starting at depth 1, move deeper with probability `p_λ`, shallower
/// otherwise, always shallower at the bottom; stop on reaching depth 0.
pub fn sample_trap_excursion(len: u32, lambda: f64, stream: &mut RandomStream) -> Result<u64> {
    if len < 1 {
        return Err(invalid("len", "trap length must be >= 1"));
    }
    check_lambda(lambda)?;
    Ok(excursion(len, p_right(lambda), stream))
}

#[inline]
fn excursion(len: u32, p_deeper: f64, stream: &mut RandomStream) -> u64 {
    let mut steps = 1u64;
    let mut depth = 1u32;
    while depth > 0 {
        if depth < len && stream.next_uniform() < p_deeper {
            depth += 1;
        } else {
            depth -= 1;
        }
        steps += 1;
    }
    steps
}

/// Number of trap entries before leaving horizontally:
/// `P(N = n) = (1 − q)^n q`, `n ≥ 0`.
pub fn sample_entry_count(q: f64, stream: &mut RandomStream) -> u64 {
    let mut n = 0;
    while stream.next_uniform() >= q {
        n += 1;
    }
    n
}

/// `S_ℓ = 1 + Σ_{k=1}^{N} t_{ℓ,k}`; exactly 1 when `ℓ = 0`.
pub fn sample_site_sojourn(len: u32, lambda: f64, q: f64, stream: &mut RandomStream) -> Result<f64> {
    check_lambda(lambda)?;
    check_q(q)?;
    Ok(compound_sojourn(len, p_right(lambda), q, stream))
}

#[inline]
fn compound_sojourn(len: u32, p_deeper: f64, q: f64, stream: &mut RandomStream) -> f64 {
    if len == 0 {
        return 1.0;
    }
    let entries = sample_entry_count(q, stream);
    let mut total = 1u64;
    for _ in 0..entries {
        total += excursion(len, p_deeper, stream);
    }
    total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_streams::{Channel, StreamFamily};
    use crate::trap_formulas::{mean_excursion, mean_sojourn};

    fn stream(seed: u64) -> RandomStream {
        StreamFamily::new(seed, 0, Channel::Hold).stream(0, 1)
    }

    #[test]
    fn exponential_mean_and_tail() {
        let mut s = stream(1);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let t = sample_exponential(2.0, &mut s).unwrap();
            assert!(t > 0.0);
            sum += t;
        }
        let mean = sum / n as f64;
        assert!((1.98..=2.02).contains(&mean), "mean {mean}");

        let mut s = stream(2);
        let over = (0..n)
            .filter(|_| sample_exponential(1.0, &mut s).unwrap() > 1.0)
            .count();
        let p = over as f64 / n as f64;
        assert!((p - (-1.0f64).exp()).abs() < 0.005, "tail {p}");
        assert!(sample_exponential(0.0, &mut s).is_err());
        assert!(sample_exponential(-1.0, &mut s).is_err());
    }

    #[test]
    fn length_one_trap_takes_two_steps() {
        let mut s = stream(3);
        for _ in 0..1000 {
            assert_eq!(sample_trap_excursion(1, 0.7, &mut s).unwrap(), 2);
        }
        assert!(sample_trap_excursion(0, 0.7, &mut s).is_err());
    }

    #[test]
    fn excursions_are_even() {
        let mut s = stream(4);
        for len in 1..6 {
            for _ in 0..2000 {
                let t = sample_trap_excursion(len, 0.5, &mut s).unwrap();
                assert!(t >= 2 && t % 2 == 0, "t = {t}");
            }
        }
    }

    #[test]
    fn depth_two_excursion_mean() {
        let mut s = stream(5);
        let n = 1_000_000;
        let sum: u64 = (0..n)
            .map(|_| sample_trap_excursion(2, 0.5, &mut s).unwrap())
            .sum();
        let mean = sum as f64 / n as f64;
        assert!((7.36..=7.51).contains(&mean), "mean {mean}");
        assert!((mean_excursion(2, 0.5) - 7.436_563_656_918_09).abs() < 1e-12);
    }

    #[test]
    fn entry_count_is_geometric_from_zero() {
        let mut s = stream(6);
        let n = 200_000;
        let q = 0.3;
        let zeros = (0..n).filter(|_| sample_entry_count(q, &mut s) == 0).count();
        let p0 = zeros as f64 / n as f64;
        assert!((p0 - q).abs() < 0.005, "P(N=0) {p0}");
    }

    #[test]
    fn sojourn_without_trap_is_one() {
        let mut s = stream(7);
        for _ in 0..100 {
            assert_eq!(sample_site_sojourn(0, 0.5, 0.5, &mut s).unwrap(), 1.0);
        }
        assert!(sample_site_sojourn(1, 0.5, 0.0, &mut s).is_err());
        assert!(sample_site_sojourn(1, 0.5, 1.0, &mut s).is_err());
    }

    #[test]
    fn sojourn_mean_depth_two() {
        let mut s = stream(8);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut ones = 0u64;
        for _ in 0..n {
            let t = sample_site_sojourn(2, 0.5, 0.5, &mut s).unwrap();
            if t == 1.0 {
                ones += 1;
            }
            sum += t;
        }
        let mean = sum / n as f64;
        let target = mean_sojourn(2, 0.5, 0.5);
        assert!((mean / target - 1.0).abs() < 0.015, "{mean} vs {target}");
        // S = 1 exactly iff N = 0
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn sampler_means_match_w() {
        let site = SiteTrap { w: 3.5, trap_len: 0 };
        let exp = HoldingTimeModel::Exponential.sampler();
        let det = HoldingTimeModel::Deterministic.sampler();
        let mut s = stream(9);
        let n = 1_000_000;
        let mean = (0..n).map(|_| exp.sample(site, &mut s)).sum::<f64>() / n as f64;
        assert!((mean / 3.5 - 1.0).abs() < 0.01);
        assert_eq!(det.sample(site, &mut s), 3.5);

        let trap = SiteTrap {
            w: mean_sojourn(3, 0.25, 0.4),
            trap_len: 3,
        };
        let comp = HoldingTimeModel::trap_compound(0.25, 0.4).unwrap().sampler();
        let mean = (0..n).map(|_| comp.sample(trap, &mut s)).sum::<f64>() / n as f64;
        assert!((mean / trap.w - 1.0).abs() < 0.015, "{mean} vs {}", trap.w);
    }
}
