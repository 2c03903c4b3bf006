//! Counter-based random streams.
//!
//! Every random draw is a pure function of (master seed, stream label, sample
//! index), so results are bit-identical no matter how samples are scheduled
//! across worker threads. Streams are cheap to fork: hashing the label into
//! the key is all it takes.

/// SplitMix64 finalizer; a full-avalanche 64-bit mixer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A keyed counter stream: `nth(i)` is an O(1) pure function of the key and
/// the index, with no mutable state.
#[derive(Clone, Copy, Debug)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    /// Derive a stream from a master seed and a textual label.
    pub fn stream(seed: u64, label: &str) -> Self {
        let mut key = mix64(seed ^ 0x6c69_6e6b_6d00_0001);
        for &b in label.as_bytes() {
            key = mix64(key ^ u64::from(b));
        }
        CounterRng { key }
    }

    /// Derive a numbered substream (e.g. one per Monte Carlo term block).
    pub fn substream(self, index: u64) -> Self {
        CounterRng { key: mix64(self.key ^ mix64(index ^ 0xa5a5_5a5a_0f0f_f0f0)) }
    }

    pub fn key(self) -> u64 {
        self.key
    }

    #[inline]
    pub fn bits(self, ctr: u64) -> u64 {
        mix64(self.key ^ mix64(ctr))
    }

    /// Uniform draw in [0, 1).
    #[inline]
    pub fn uniform(self, ctr: u64) -> f64 {
        // 53 high bits -> [0,1) with full double precision.
        (self.bits(ctr) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in (0, 1]; safe as a log() argument.
    #[inline]
    pub fn uniform_open(self, ctr: u64) -> f64 {
        1.0 - self.uniform(ctr)
    }

    /// Standard normal pair by Box-Muller from counters (2·ctr, 2·ctr+1).
    #[inline]
    pub fn gaussian_pair(self, ctr: u64) -> (f64, f64) {
        let u1 = self.uniform_open(2 * ctr);
        let u2 = self.uniform(2 * ctr + 1);
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }

    /// Standard normal 3-vector from three consecutive counters at base `ctr`.
    #[inline]
    pub fn gaussian3(self, ctr: u64) -> crate::geom::Vec3 {
        let (a, b) = self.gaussian_pair(2 * ctr);
        let (c, _) = self.gaussian_pair(2 * ctr + 1);
        crate::geom::Vec3::new(a, b, c)
    }

    /// Uniform direction on the unit sphere.
    #[inline]
    pub fn unit_vector(self, ctr: u64) -> crate::geom::Vec3 {
        // Rejection-free: z uniform in [-1,1], azimuth uniform.
        let z = 2.0 * self.uniform(2 * ctr) - 1.0;
        let phi = std::f64::consts::TAU * self.uniform(2 * ctr + 1);
        let r = (1.0 - z * z).max(0.0).sqrt();
        crate::geom::Vec3::new(r * phi.cos(), r * phi.sin(), z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_pure_functions() {
        let a = CounterRng::stream(42, "term.W.block0");
        let b = CounterRng::stream(42, "term.W.block0");
        for i in 0..100 {
            assert_eq!(a.bits(i), b.bits(i));
        }
        let c = CounterRng::stream(42, "term.W.block1");
        assert_ne!(a.bits(7), c.bits(7));
        let d = CounterRng::stream(43, "term.W.block0");
        assert_ne!(a.bits(7), d.bits(7));
    }

    #[test]
    fn uniform_bounds_and_moments() {
        let s = CounterRng::stream(7, "moments");
        let n = 200_000u64;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for i in 0..n {
            let u = s.uniform(i);
            assert!((0.0..1.0).contains(&u));
            sum += u;
            sum2 += u * u;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        assert!((mean - 0.5).abs() < 3e-3, "mean {mean}");
        assert!((var - 1.0 / 12.0).abs() < 3e-3, "var {var}");
    }

    #[test]
    fn gaussian_moments() {
        let s = CounterRng::stream(11, "gauss");
        let n = 100_000u64;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for i in 0..n {
            let (a, b) = s.gaussian_pair(i);
            sum += a + b;
            sum2 += a * a + b * b;
        }
        let m = 2.0 * n as f64;
        assert!((sum / m).abs() < 5e-3);
        assert!((sum2 / m - 1.0).abs() < 1e-2);
    }

    #[test]
    fn unit_vectors_are_unit() {
        let s = CounterRng::stream(3, "dirs");
        let mut mean = crate::geom::Vec3::ZERO;
        for i in 0..10_000 {
            let v = s.unit_vector(i);
            assert!((v.norm() - 1.0).abs() < 1e-12);
            mean += v;
        }
        assert!(mean.norm() / 10_000.0 < 0.05);
    }
}
