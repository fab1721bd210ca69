//! Coordinate-addressed random streams.
//!
//! Every random decision in a simulation is keyed by
//! `(master_seed, replica, site, visit, channel)`. A key is hashed into a
//! 64-bit stream state and the stream itself is a SplitMix64 counter
//! sequence, so no per-site generator state ever has to be stored and sites
//! can be visited in any order.

/// Separates the independent uses of randomness at one `(site, visit)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channel {
    /// Backbone step direction.
    Step,
    /// Explicit trap-graph moves.
    Trap,
    /// Holding-time draws.
    Hold,
    /// Environment realisation.
    Env,
}

impl Channel {
    fn tag(self) -> u64 {
        match self {
            Channel::Step => 0x5354_4550,
            Channel::Trap => 0x5452_4150,
            Channel::Hold => 0x484f_4c44,
            Channel::Env => 0x454e_5600,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub replica: u64,
    pub site: i64,
    pub visit: u64,
    pub channel: Channel,
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 / Stafford variant 13 finaliser. A bijection on `u64`.
#[inline(always)]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline(always)]
fn absorb(h: u64, word: u64) -> u64 {
    mix64(h.wrapping_add(GOLDEN_GAMMA) ^ word)
}

/// Pre-hashed `(master_seed, replica, channel)` prefix. Deriving a stream
/// from a family only absorbs the site and visit index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamFamily {
    prefix: u64,
}

impl StreamFamily {
    pub fn new(master_seed: u64, replica: u64, channel: Channel) -> Self {
        let mut h = mix64(master_seed ^ 0x7472_6170_7761_6c6b);
        h = absorb(h, replica);
        h = absorb(h, channel.tag());
        StreamFamily { prefix: h }
    }

    #[inline]
    pub fn stream(&self, site: i64, visit: u64) -> RandomStream {
        let h = absorb(absorb(self.prefix, site as u64), visit);
        RandomStream { state: h }
    }
}

/// Derives the stream addressed by `key`. Pure and thread-safe.
pub fn derive_stream(key: StreamKey) -> RandomStream {
    StreamFamily::new(key.master_seed, key.replica, key.channel).stream(key.site, key.visit)
}

/// A value-like generator of uniforms on the open interval (0, 1).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomStream {
    state: u64,
}

impl RandomStream {
    #[inline(always)]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform on (0, 1): the 53-bit grid shifted by half a cell, so neither
    /// endpoint can occur.
    #[inline(always)]
    pub fn next_uniform(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        ((self.next_u64() >> 11) as f64 + 0.5) * SCALE
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn key(site: i64, visit: u64) -> StreamKey {
        StreamKey {
            master_seed: 42,
            replica: 3,
            site,
            visit,
            channel: Channel::Step,
        }
    }

    #[test]
    fn same_key_same_stream() {
        let mut a = derive_stream(key(-7, 2));
        let mut b = derive_stream(key(-7, 2));
        for _ in 0..100 {
            assert_eq!(a.next_uniform(), b.next_uniform());
        }
    }

    #[test]
    fn visit_index_changes_every_draw() {
        let mut a = derive_stream(key(5, 1));
        let mut b = derive_stream(key(5, 2));
        for _ in 0..100 {
            assert_ne!(a.next_uniform(), b.next_uniform());
        }
    }

    #[test]
    fn family_matches_direct_derivation() {
        let fam = StreamFamily::new(42, 3, Channel::Step);
        assert_eq!(fam.stream(-7, 2), derive_stream(key(-7, 2)));
    }

    #[test]
    fn million_keys_have_distinct_heads() {
        let mut seen = HashSet::with_capacity(1 << 21);
        let channels = [Channel::Step, Channel::Trap, Channel::Hold, Channel::Env];
        let mut n = 0u64;
        'outer: for replica in 0..4u64 {
            for &channel in &channels {
                for site in -250..250i64 {
                    for visit in 0..125u64 {
                        let k = StreamKey {
                            master_seed: 1,
                            replica,
                            site,
                            visit,
                            channel,
                        };
                        let u = derive_stream(k).next_uniform();
                        assert!(seen.insert(u.to_bits()), "collision at {k:?}");
                        n += 1;
                        if n == 1_000_000 {
                            break 'outer;
                        }
                    }
                }
            }
        }
        assert_eq!(seen.len(), 1_000_000);
    }

    #[test]
    fn uniform_mean_and_open_interval() {
        let mut s = derive_stream(key(0, 0));
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let u = s.next_uniform();
            assert!(u > 0.0 && u < 1.0);
            sum += u;
        }
        let mean = sum / n as f64;
        assert!((0.498..=0.502).contains(&mean), "mean {mean}");
    }

    #[test]
    fn kolmogorov_smirnov_against_uniform() {
        let mut s = derive_stream(key(11, 0));
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| s.next_uniform()).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let hi = (i + 1) as f64 / n as f64 - x;
                let lo = x - i as f64 / n as f64;
                hi.max(lo)
            })
            .fold(0.0f64, f64::max);
        assert!(d < 0.006, "KS statistic {d}");
    }

    #[test]
    fn distinct_substreams_uncorrelated() {
        let fam = StreamFamily::new(9, 0, Channel::Hold);
        let n = 100_000;
        let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let x = fam.stream(i, 1).next_uniform();
            let y = fam.stream(i, 2).next_uniform();
            sx += x;
            sy += y;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        let nf = n as f64;
        let cov = sxy / nf - sx * sy / nf / nf;
        let vx = sxx / nf - (sx / nf).powi(2);
        let vy = syy / nf - (sy / nf).powi(2);
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() < 0.01, "corr {corr}");
    }
}
