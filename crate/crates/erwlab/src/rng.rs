//! Counter-based splittable random streams.
//!
//! Every replica of a Monte Carlo run owns a `Stream` derived purely from
//! `(master_seed, replica_index)`, so replica i produces the same draws no
//! matter how many threads execute the batch or in which order. The generator
//! is the splitmix64 construction: a 64-bit counter advanced by the golden
//! ratio and pushed through an avalanche mix.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const TWO_PI: f64 = std::f64::consts::TAU;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream { state: mix(seed) }
    }

    /// Stream for replica `index` of a run with the given master seed.
    /// Two mixing rounds decorrelate nearby (seed, index) pairs.
    pub fn substream(master_seed: u64, index: u64) -> Self {
        let tweak = mix(index.wrapping_mul(GOLDEN_GAMMA) ^ 0xD1B5_4A32_D192_ED03);
        Stream {
            state: mix(master_seed ^ tweak),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform in [0, 1) with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform in (0, 1]; safe to pass to ln().
    #[inline]
    pub fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform integer in [0, bound) by the multiply-shift reduction.
    /// bound must be nonzero.
    #[inline]
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    /// Bernoulli(prob).
    #[inline]
    pub fn next_bool(&mut self, prob: f64) -> bool {
        self.next_f64() < prob
    }

    /// Standard normal via Box-Muller. Always consumes exactly two uniforms
    /// so the draw count per step is fixed.
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (TWO_PI * u2).cos()
    }
}
