//! Mean-waiting-time fields `w_x` and trap metadata for the three
//! environment families: i.i.d. Pareto, comb with geometric trap lengths,
//! and the ladder whose trap lengths follow the occupancy Markov chain.

use std::io::{self, Write};
use std::ops::Range;

use crate::error::{invalid, Error, Result};
use crate::rng_streams::StreamFamily;
use crate::site_table::SiteTable;
use crate::trap_formulas::mean_sojourn;

/// Tail mass below which the invariant measure is truncated.
pub const PI_TRUNCATION: f64 = 1e-14;

/// Longest support a truncated law may need before it is declared divergent.
const MAX_SUPPORT: usize = 10_000_000;

/// Distribution of a trap length `L` on `ℕ₀`.
#[derive(Clone, Debug, PartialEq)]
pub enum TrapLengthLaw {
    /// `P(L = ℓ) = (1 − e^{−α}) e^{−αℓ}`.
    Geometric { alpha: f64 },
    /// Finite probability table, `pmf[ℓ] = P(L = ℓ)`.
    Table { pmf: Vec<f64> },
}

impl TrapLengthLaw {
    pub fn geometric(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(invalid("alpha", format!("must be > 0, got {alpha}")));
        }
        Ok(TrapLengthLaw::Geometric { alpha })
    }

    /// `L ≡ 0`.
    pub fn zero() -> Self {
        TrapLengthLaw::Table { pmf: vec![1.0] }
    }

    pub fn from_pmf(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() || pmf.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("pmf", "entries must be finite and non-negative"));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("pmf", format!("must sum to 1, sums to {total}")));
        }
        Ok(TrapLengthLaw::Table { pmf })
    }

    pub fn pmf(&self, len: u64) -> f64 {
        match self {
            TrapLengthLaw::Geometric { alpha } => {
                -(-alpha).exp_m1() * (-alpha * len as f64).exp()
            }
            TrapLengthLaw::Table { pmf } => pmf.get(len as usize).copied().unwrap_or(0.0),
        }
    }

    /// `P(L ≥ len)`.
    pub fn tail(&self, len: u64) -> f64 {
        match self {
            TrapLengthLaw::Geometric { alpha } => (-alpha * len as f64).exp(),
            TrapLengthLaw::Table { pmf } => pmf.iter().skip(len as usize).sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            TrapLengthLaw::Geometric { alpha } => (-alpha).exp() / -(-alpha).exp_m1(),
            TrapLengthLaw::Table { pmf } => {
                pmf.iter().enumerate().map(|(j, p)| j as f64 * p).sum()
            }
        }
    }

    /// `E[(L − len)⁺] = Σ_{j > len} P(L ≥ j)`.
    fn excess(&self, len: u64) -> f64 {
        match self {
            TrapLengthLaw::Geometric { alpha } => {
                (-alpha * (len + 1) as f64).exp() / -(-alpha).exp_m1()
            }
            TrapLengthLaw::Table { pmf } => pmf
                .iter()
                .enumerate()
                .skip(len as usize + 1)
                .map(|(j, p)| (j as u64 - len) as f64 * p)
                .sum(),
        }
    }

    /// Inverse-CDF sample from a uniform on (0, 1).
    pub fn sample(&self, u: f64) -> u32 {
        match self {
            TrapLengthLaw::Geometric { alpha } => {
                let l = (u.ln() / -alpha).floor();
                if l >= u32::MAX as f64 {
                    u32::MAX
                } else {
                    l as u32
                }
            }
            TrapLengthLaw::Table { pmf } => {
                let mut acc = 0.0;
                for (j, p) in pmf.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return j as u32;
                    }
                }
                (pmf.len() - 1) as u32
            }
        }
    }
}

/// Stationary law of the trap-occupancy chain, truncated where the
/// remaining mass drops below the requested tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantMeasure {
    pub weights: Vec<f64>,
    /// Mass beyond the last stored weight before renormalisation.
    pub tail_mass: f64,
}

impl InvariantMeasure {
    #[inline]
    pub fn weight(&self, j: usize) -> f64 {
        self.weights.get(j).copied().unwrap_or(0.0)
    }

    /// Largest absolute residual of the balance equations
    /// `π(0)P(L=0) + π(1)P(L=0) = π(0)` and
    /// `π(0)P(L=j) + π(1)P(L=j) + π(j+1) = π(j)` for `j ≥ 1`.
    pub fn balance_residual(&self, law: &TrapLengthLaw) -> f64 {
        let head = self.weight(0) + self.weight(1);
        let mut worst = (head * law.pmf(0) - self.weight(0)).abs();
        for j in 1..=self.weights.len() {
            let r = head * law.pmf(j as u64) + self.weight(j + 1) - self.weight(j);
            worst = worst.max(r.abs());
        }
        worst
    }

    /// Inverse-CDF sample.
    pub fn sample(&self, u: f64) -> u32 {
        let mut acc = 0.0;
        for (j, p) in self.weights.iter().enumerate() {
            acc += p;
            if u < acc {
                return j as u32;
            }
        }
        (self.weights.len() - 1) as u32
    }
}

/// `π(0) = P(L=0)/(P(L=0)+E[L])`, `π(j) = P(L≥j)/(P(L=0)+E[L])`, truncated
/// at the first index whose remaining mass is below `tol`, then renormalised.
pub fn solve_invariant_pi(law: &TrapLengthLaw, tol: f64) -> Result<InvariantMeasure> {
    let mean = law.mean();
    if !mean.is_finite() {
        return Err(Error::Divergent(format!("E[L] = {mean}")));
    }
    let norm = law.pmf(0) + mean;
    let mut weights = vec![law.pmf(0) / norm];
    let mut last = 0u64;
    loop {
        let rest = law.excess(last) / norm;
        if rest < tol {
            break;
        }
        last += 1;
        if last as usize > MAX_SUPPORT {
            return Err(Error::Divergent(format!(
                "remaining mass {rest:e} after {MAX_SUPPORT} states"
            )));
        }
        weights.push(law.tail(last) / norm);
    }
    let tail_mass = law.excess(last) / norm;
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(InvariantMeasure { weights, tail_mass })
}

/// Marginal law of the ladder trap length `Λ₀`:
/// `P(Λ₀ = j) = P(L = j)(π(0)+π(1)) + δ_{j,0}(1 − π(0) − π(1))`.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaMarginal {
    pub law: TrapLengthLaw,
    /// `π(0) + π(1)`, the probability that a fresh trap may start.
    pub open_weight: f64,
}

impl LambdaMarginal {
    pub fn pmf(&self, j: u64) -> f64 {
        let base = self.law.pmf(j) * self.open_weight;
        if j == 0 {
            base + (1.0 - self.open_weight)
        } else {
            base
        }
    }

    /// `E[w₀] = Σ_j S̄_j P(Λ₀ = j)`, summed until the remaining terms are
    /// negligible; `+∞` when the series diverges.
    pub fn expected_sojourn(&self, lambda: f64, q: f64) -> f64 {
        match &self.law {
            TrapLengthLaw::Table { pmf } => (0..pmf.len() as u64)
                .map(|j| mean_sojourn(j as u32, lambda, q) * self.pmf(j))
                .sum(),
            TrapLengthLaw::Geometric { alpha } => {
                if 2.0 * lambda >= *alpha {
                    return f64::INFINITY;
                }
                // terms decay at least like e^{(2λ−α) j}
                let ratio = (2.0 * lambda - alpha).exp();
                let mut sum = 0.0;
                let mut j = 0u64;
                loop {
                    let term = mean_sojourn(j as u32, lambda, q) * self.pmf(j);
                    sum += term;
                    if j > 0 && term * ratio / (1.0 - ratio) < 1e-17 * sum {
                        return sum;
                    }
                    j += 1;
                }
            }
        }
    }
}

pub fn lambda_marginal(law: &TrapLengthLaw, pi: &InvariantMeasure) -> LambdaMarginal {
    LambdaMarginal {
        law: law.clone(),
        open_weight: pi.weight(0) + pi.weight(1),
    }
}

/// Realised data at one backbone site.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SiteTrap {
    /// Mean holding time `w_x`.
    pub w: f64,
    pub trap_len: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EnvKind {
    /// Constant `w`, no traps.
    Flat { w: f64 },
    ParetoIid { alpha: f64 },
    CombGeometric { alpha: f64, q: f64, lambda: f64 },
    LadderMarkov { alpha: f64, q: f64, lambda: f64 },
}

impl EnvKind {
    pub fn name(&self) -> &'static str {
        match self {
            EnvKind::Flat { .. } => "flat",
            EnvKind::ParetoIid { .. } => "pareto_iid",
            EnvKind::CombGeometric { .. } => "comb_geometric",
            EnvKind::LadderMarkov { .. } => "ladder_markov",
        }
    }
}

/// Occupancy chain state for the ladder: `Z` over `[lo, hi)`.
#[derive(Clone, Debug)]
struct LadderChain {
    law: TrapLengthLaw,
    pi: InvariantMeasure,
    z: SiteTable<u32>,
    /// Sites where `Z` is realised; the table itself may hold padding.
    zr: Range<i64>,
}

impl LadderChain {
    fn forward(&self, prev: u32, u: f64) -> u32 {
        if prev <= 1 {
            self.law.sample(u)
        } else {
            prev - 1
        }
    }

    /// One step of the time-reversed stationary chain:
    /// `P(Z_{x−1} = j | Z_x = i) = π(j) p(j, i) / π(i)`.
    fn backward(&self, next: u32, u: f64) -> u32 {
        let i = next as usize;
        let stay_in_trap = if i >= 1 && self.pi.weight(i) > 0.0 {
            self.pi.weight(i + 1) / self.pi.weight(i)
        } else {
            0.0
        };
        if u < stay_in_trap {
            return next + 1;
        }
        let v = (u - stay_in_trap) / (1.0 - stay_in_trap);
        let p0 = self.pi.weight(0) / (self.pi.weight(0) + self.pi.weight(1));
        if v < p0 {
            0
        } else {
            1
        }
    }
}

/// Trap length rooted at `x` given the occupancy at `x − 1` and `x`.
#[inline]
pub fn ladder_trap_len(prev: u32, cur: u32) -> u32 {
    if cur >= prev {
        cur
    } else {
        0
    }
}

/// Lazily extendable, deterministic assignment `x ↦ (w_x, trap_len(x))`.
#[derive(Clone, Debug)]
pub struct TrapEnvironment {
    kind: EnvKind,
    seeds: StreamFamily,
    sites: SiteTable<SiteTrap>,
    sojourn_cache: Vec<f64>,
    ladder: Option<LadderChain>,
}

const SOJOURN_CACHE: u32 = 64;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(invalid("alpha", format!("must be > 0, got {alpha}")))
    }
}

fn check_trap_params(alpha: f64, q: f64, lambda: f64) -> Result<()> {
    check_alpha(alpha)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(invalid("q", format!("must lie in (0,1), got {q}")));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(invalid("lambda", format!("must be > 0, got {lambda}")));
    }
    Ok(())
}

impl TrapEnvironment {
    fn with_kind(kind: EnvKind, seeds: StreamFamily) -> Self {
        let sojourn_cache = match kind {
            EnvKind::CombGeometric { q, lambda, .. } | EnvKind::LadderMarkov { q, lambda, .. } => {
                (0..SOJOURN_CACHE).map(|l| mean_sojourn(l, lambda, q)).collect()
            }
            _ => Vec::new(),
        };
        TrapEnvironment {
            kind,
            seeds,
            sites: SiteTable::new(),
            sojourn_cache,
            ladder: None,
        }
    }

    /// Constant mean holding time `w` and no traps.
    pub fn flat(w: f64) -> Result<Self> {
        if !(w.is_finite() && w > 0.0) {
            return Err(invalid("w", format!("must be > 0, got {w}")));
        }
        Ok(Self::with_kind(
            EnvKind::Flat { w },
            StreamFamily::new(0, 0, crate::rng_streams::Channel::Env),
        ))
    }

    pub fn kind(&self) -> &EnvKind {
        &self.kind
    }

    pub fn realized(&self) -> Range<i64> {
        self.sites.range()
    }

    /// Occupancy `Z_x` of the ladder chain, if realised.
    pub fn ladder_occupancy(&self, x: i64) -> Option<u32> {
        self.ladder
            .as_ref()
            .filter(|c| c.zr.contains(&x))
            .and_then(|c| c.z.get(x))
    }

    pub fn invariant_measure(&self) -> Option<&InvariantMeasure> {
        self.ladder.as_ref().map(|c| &c.pi)
    }

    /// Realises every site in `window`.
    pub fn realize(&mut self, window: Range<i64>) {
        if window.is_empty() {
            return;
        }
        self.site(window.start);
        self.site(window.end - 1);
    }

    #[inline]
    fn sojourn_mean(&self, len: u32) -> f64 {
        match self.sojourn_cache.get(len as usize) {
            Some(&s) => s,
            None => match self.kind {
                EnvKind::CombGeometric { q, lambda, .. }
                | EnvKind::LadderMarkov { q, lambda, .. } => mean_sojourn(len, lambda, q),
                _ => 1.0,
            },
        }
    }

    /// Data at site `x`, realising it (and everything between it and the
    /// current window) on first access.
    #[inline]
    pub fn site(&mut self, x: i64) -> SiteTrap {
        match self.sites.get(x) {
            Some(s) if s.w > 0.0 => s,
            _ => self.extend_to(x),
        }
    }

    /// Data at site `x` if already realised.
    pub fn get(&self, x: i64) -> Option<SiteTrap> {
        self.sites.get(x).filter(|s| s.w > 0.0)
    }

    #[cold]
    fn extend_to(&mut self, x: i64) -> SiteTrap {
        match self.kind.clone() {
            EnvKind::Flat { w } => self.fill_pointwise(x, |_, _| SiteTrap { w, trap_len: 0 }),
            EnvKind::ParetoIid { alpha } => self.fill_pointwise(x, |_, u| SiteTrap {
                w: (-u.ln() / alpha).exp(),
                trap_len: 0,
            }),
            EnvKind::CombGeometric { alpha, .. } => {
                let law = TrapLengthLaw::Geometric { alpha };
                self.fill_pointwise(x, |env, u| {
                    let len = law.sample(u);
                    SiteTrap {
                        w: env.sojourn_mean(len),
                        trap_len: len,
                    }
                })
            }
            EnvKind::LadderMarkov { .. } => self.extend_ladder(x),
        }
    }

    /// Fills all missing sites between the current window and `x` with
    /// values that depend only on the site's own ENV stream.
    fn fill_pointwise(&mut self, x: i64, f: impl Fn(&Self, f64) -> SiteTrap) -> SiteTrap {
        let range = self.sites.range();
        let todo: Range<i64> = if self.sites.is_empty() {
            x..x + 1
        } else if x < range.start {
            x..range.start
        } else if x >= range.end {
            range.end..x + 1
        } else {
            x..x + 1
        };
        for y in todo {
            let u = self.seeds.stream(y, 0).next_uniform();
            let s = f(self, u);
            *self.sites.slot(y) = s;
        }
        self.sites.value(x)
    }

    fn extend_ladder(&mut self, x: i64) -> SiteTrap {
        let mut chain = self.ladder.take().expect("ladder chain initialised");
        // Z is realised on zr, sites on [zr.start + 1, zr.end).
        let zr = chain.zr.clone();
        if x >= zr.end {
            for y in zr.end..=x {
                let prev = chain.z.value(y - 1);
                let u = self.seeds.stream(y, 0).next_uniform();
                let cur = chain.forward(prev, u);
                *chain.z.slot(y) = cur;
                let len = ladder_trap_len(prev, cur);
                *self.sites.slot(y) = SiteTrap {
                    w: self.sojourn_mean(len),
                    trap_len: len,
                };
            }
            chain.zr.end = x + 1;
        } else if x <= zr.start {
            for y in (x - 1..zr.start).rev() {
                let next = chain.z.value(y + 1);
                let u = self.seeds.stream(y, 0).next_uniform();
                let cur = chain.backward(next, u);
                *chain.z.slot(y) = cur;
                let len = ladder_trap_len(cur, next);
                *self.sites.slot(y + 1) = SiteTrap {
                    w: self.sojourn_mean(len),
                    trap_len: len,
                };
            }
            chain.zr.start = x - 1;
        }
        self.ladder = Some(chain);
        self.sites.value(x)
    }

    /// Writes `site<TAB>trap_len<TAB>w_x` for every realised site, floats
    /// with 17 significant digits.
    pub fn dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (x, s) in self.sites.iter() {
            if s.w > 0.0 {
                writeln!(out, "{}\t{}\t{:.16e}", x, s.trap_len, s.w)?;
            }
        }
        Ok(())
    }
}

/// I.i.d. Pareto field `w_x = U^{−1/α}`, so `P(w ≥ t) = t^{−α}` for `t ≥ 1`.
pub fn gen_pareto_iid(alpha: f64, window: Range<i64>, seeds: StreamFamily) -> Result<TrapEnvironment> {
    check_alpha(alpha)?;
    let mut env = TrapEnvironment::with_kind(EnvKind::ParetoIid { alpha }, seeds);
    env.realize(window);
    Ok(env)
}

/// Comb with i.i.d. geometric trap lengths and `w_x = S̄_{L_x}`.
pub fn gen_comb_geometric(
    alpha: f64,
    q: f64,
    lambda: f64,
    window: Range<i64>,
    seeds: StreamFamily,
) -> Result<TrapEnvironment> {
    check_trap_params(alpha, q, lambda)?;
    let mut env = TrapEnvironment::with_kind(EnvKind::CombGeometric { alpha, q, lambda }, seeds);
    env.realize(window);
    Ok(env)
}

/// Ladder with horizontal traps. The occupancy chain is started from its
/// invariant measure at the window's left edge, advanced forward to the
/// right and by the time-reversed chain to the left.
pub fn gen_ladder_markov(
    alpha: f64,
    q: f64,
    lambda: f64,
    window: Range<i64>,
    seeds: StreamFamily,
) -> Result<TrapEnvironment> {
    check_trap_params(alpha, q, lambda)?;
    let law = TrapLengthLaw::Geometric { alpha };
    let pi = solve_invariant_pi(&law, PI_TRUNCATION)?;
    let mut env = TrapEnvironment::with_kind(EnvKind::LadderMarkov { alpha, q, lambda }, seeds);
    let anchor = window.start;
    let mut z = SiteTable::new();
    *z.slot(anchor) = pi.sample(seeds.stream(anchor, 1).next_uniform());
    env.ladder = Some(LadderChain {
        law,
        pi,
        z,
        zr: anchor..anchor + 1,
    });
    // the anchor's own trap length needs Z at anchor − 1
    env.site(anchor);
    env.realize(window);
    Ok(env)
}
