/// SplitMix64 generator. Self-contained so that draw sequences are
/// reproducible bit-for-bit from a seed without pulling in a dependency;
/// the single u64 of state also makes checkpointing trivial.
///
/// Reference sequence: Steele, Lea & Flood's SplitMix64, the same stream
/// used by `java.util.SplittableRandom`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rng64 {
    state: u64,
}

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Rng64 { state: seed }
    }

    /// Resume a generator from a previously captured `state()`.
    pub fn from_state(state: u64) -> Self {
        Rng64 { state }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). Modulo bias is ~2^-64 per draw and
    /// irrelevant at the dataset sizes involved.
    pub fn next_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.next_below(i + 1);
            xs.swap(i, j);
        }
    }
}

/// Seeded standard-normal source: SplitMix64 feeding the Marsaglia polar
/// method. No spare value is cached, so the full generator state is the one
/// u64 of the underlying stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaussSource {
    rng: Rng64,
}

impl GaussSource {
    pub fn new(seed: u64) -> Self {
        GaussSource {
            rng: Rng64::new(seed),
        }
    }

    pub fn from_state(state: u64) -> Self {
        GaussSource {
            rng: Rng64::from_state(state),
        }
    }

    pub fn state(&self) -> u64 {
        self.rng.state()
    }

    /// One standard-normal draw.
    pub fn draw(&mut self) -> f64 {
        loop {
            let u = 2.0 * self.rng.next_f64() - 1.0;
            let v = 2.0 * self.rng.next_f64() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                return u * (-2.0 * s.ln() / s).sqrt();
            }
        }
    }

    /// `n` independent standard-normal draws.
    pub fn draw_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.draw()).collect()
    }
}
