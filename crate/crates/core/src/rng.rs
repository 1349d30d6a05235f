//! Seeded randomness for the fundamental processes.
//!
//! A master seed is split into one seed per source with SplitMix64:
//! `seed(source) = splitmix64(master + (k + 1) * 0x9E3779B97F4A7C15)` where
//! `k` is the source's position in [`Source::ALL`]. Each source then drives
//! its own ChaCha8 generator, so sources never share state.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::UnitDist;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The independent sources of randomness driving a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Arrivals,
    Spontaneous,
    Sizes,
    U1,
    U2,
    U3,
    U4,
    U5,
    U6,
    U7,
    U8,
    Initial,
}

impl Source {
    pub const ALL: [Source; 12] = [
        Source::Arrivals,
        Source::Spontaneous,
        Source::Sizes,
        Source::U1,
        Source::U2,
        Source::U3,
        Source::U4,
        Source::U5,
        Source::U6,
        Source::U7,
        Source::U8,
        Source::Initial,
    ];

    pub fn index(self) -> usize {
        Source::ALL.iter().position(|&s| s == self).unwrap()
    }

    pub fn key(self) -> &'static str {
        match self {
            Source::Arrivals => "arrivals",
            Source::Spontaneous => "spontaneous",
            Source::Sizes => "sizes",
            Source::U1 => "u1",
            Source::U2 => "u2",
            Source::U3 => "u3",
            Source::U4 => "u4",
            Source::U5 => "u5",
            Source::U6 => "u6",
            Source::U7 => "u7",
            Source::U8 => "u8",
            Source::Initial => "initial",
        }
    }

    pub fn from_key(key: &str) -> Option<Source> {
        Source::ALL.into_iter().find(|s| s.key() == key)
    }
}

/// One seed per [`Source`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSeeds(pub [u64; 12]);

impl SourceSeeds {
    pub fn from_master(master: u64) -> Self {
        let mut seeds = [0u64; 12];
        for (k, seed) in seeds.iter_mut().enumerate() {
            *seed = splitmix64(master.wrapping_add((k as u64 + 1).wrapping_mul(GOLDEN_GAMMA)));
        }
        SourceSeeds(seeds)
    }

    pub fn get(&self, source: Source) -> u64 {
        self.0[source.index()]
    }

    pub fn set(&mut self, source: Source, seed: u64) {
        self.0[source.index()] = seed;
    }
}

/// A single uniform variate, kept as raw bits.
///
/// Decision functions take one `Draw` per call, mirroring the single uniform
/// each decision receives in the model. [`Draw::expand`] derives a
/// deterministic stream of further uniforms from the same bits for
/// decisions that need more than 53 bits of entropy (sampling a subset, for
/// example), so every decision stays a pure function of its inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Draw(pub u64);

impl Draw {
    /// Uniform in `[0, 1)`.
    pub fn unit(self) -> f64 {
        (self.0 >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n` (`n > 0`).
    pub fn index(self, n: usize) -> usize {
        ((self.unit() * n as f64) as usize).min(n - 1)
    }

    pub fn expand(self) -> DrawStream {
        DrawStream(ChaCha8Rng::seed_from_u64(self.0))
    }
}

pub struct DrawStream(ChaCha8Rng);

impl DrawStream {
    pub fn next_draw(&mut self) -> Draw {
        Draw(self.0.next_u64())
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }

    /// Uniformly random `k`-subset of `0..n` (partial Fisher–Yates).
    pub fn subset(&mut self, n: usize, k: usize) -> Vec<usize> {
        let k = k.min(n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = self.0.random_range(i..n);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

/// A generator of uniforms for one source.
#[derive(Debug, Clone)]
pub struct UniformStream(ChaCha8Rng);

impl UniformStream {
    pub fn new(seed: u64) -> Self {
        UniformStream(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_draw(&mut self) -> Draw {
        Draw(self.0.next_u64())
    }

    pub fn next_unit(&mut self) -> f64 {
        self.next_draw().unit()
    }
}

/// Renewal process with unit-mean gap shape scaled to the given rate.
#[derive(Debug, Clone)]
pub struct RenewalStream {
    gaps: UniformStream,
    shape: UnitDist,
    rate: f64,
    next: f64,
}

impl RenewalStream {
    pub fn new(seed: u64, shape: UnitDist, rate: f64) -> Self {
        let mut stream = RenewalStream {
            gaps: UniformStream::new(seed),
            shape,
            rate,
            next: 0.0,
        };
        if rate > 0.0 {
            stream.next = stream.gap();
        } else {
            stream.next = f64::INFINITY;
        }
        stream
    }

    fn gap(&mut self) -> f64 {
        self.shape.sample(self.gaps.next_unit()) / self.rate
    }

    /// Time of the next event (infinite if the rate is zero).
    pub fn peek(&self) -> f64 {
        self.next
    }

    /// Consume the pending event and schedule the following one.
    pub fn advance(&mut self) -> f64 {
        let now = self.next;
        if self.rate > 0.0 {
            self.next = now + self.gap();
        }
        now
    }
}

/// All randomness of one run, one independent generator per source.
#[derive(Debug, Clone)]
pub struct FundamentalStreams {
    pub arrivals: RenewalStream,
    pub spontaneous: RenewalStream,
    pub sizes: UniformStream,
    pub size_dist: UnitDist,
    pub decisions: [UniformStream; 8],
    pub initial: UniformStream,
}

impl FundamentalStreams {
    pub fn new(
        seeds: &SourceSeeds,
        interarrival: UnitDist,
        arrival_rate: f64,
        spontaneous_rate: f64,
        size_dist: UnitDist,
    ) -> Self {
        let u = |s: Source| UniformStream::new(seeds.get(s));
        FundamentalStreams {
            arrivals: RenewalStream::new(seeds.get(Source::Arrivals), interarrival, arrival_rate),
            spontaneous: RenewalStream::new(
                seeds.get(Source::Spontaneous),
                UnitDist::Exp,
                spontaneous_rate,
            ),
            sizes: u(Source::Sizes),
            size_dist,
            decisions: [
                u(Source::U1),
                u(Source::U2),
                u(Source::U3),
                u(Source::U4),
                u(Source::U5),
                u(Source::U6),
                u(Source::U7),
                u(Source::U8),
            ],
            initial: u(Source::Initial),
        }
    }

    pub fn next_size(&mut self) -> f64 {
        let size = self.size_dist.sample(self.sizes.next_unit());
        // a zero draw is possible for uniform sizes; keep workloads positive
        if size > 0.0 {
            size
        } else {
            f64::MIN_POSITIVE
        }
    }

    /// Next draw of decision stream `U_j`, `j` in `1..=8`.
    pub fn u(&mut self, j: usize) -> Draw {
        self.decisions[j - 1].next_draw()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_distinct_and_deterministic() {
        let a = SourceSeeds::from_master(7);
        let b = SourceSeeds::from_master(7);
        assert_eq!(a, b);
        let mut all = a.0.to_vec();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 12);
        assert_ne!(SourceSeeds::from_master(8), a);
    }

    #[test]
    fn draw_unit_range() {
        assert_eq!(Draw(0).unit(), 0.0);
        assert!(Draw(u64::MAX).unit() < 1.0);
        assert_eq!(Draw(u64::MAX).index(5), 4);
    }

    #[test]
    fn subset_is_distinct() {
        let mut s = Draw(99).expand();
        for _ in 0..100 {
            let mut sub = s.subset(10, 4);
            sub.sort_unstable();
            sub.dedup();
            assert_eq!(sub.len(), 4);
            assert!(sub.iter().all(|&x| x < 10));
        }
    }

    #[test]
    fn poisson_stream_mean_gap() {
        let mut s = RenewalStream::new(3, UnitDist::Exp, 4.0);
        let mut last = 0.0;
        for _ in 0..200_000 {
            last = s.advance();
        }
        let mean_gap = last / 200_000.0;
        // standard error of the mean gap is 0.25 / sqrt(2e5)
        assert!((mean_gap - 0.25).abs() < 5.0 * 0.25 / (200_000f64).sqrt());
    }

    #[test]
    fn zero_rate_never_fires() {
        let mut s = RenewalStream::new(1, UnitDist::Exp, 0.0);
        assert!(s.peek().is_infinite());
        s.advance();
        assert!(s.peek().is_infinite());
    }

    #[test]
    fn source_keys_round_trip() {
        for s in Source::ALL {
            assert_eq!(Source::from_key(s.key()), Some(s));
        }
    }
}
