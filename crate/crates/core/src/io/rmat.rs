use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::csr::CsrMatrix;
use crate::error::ConfigError;
use crate::scalar::Scalar;

/// Recursive-quadrant generator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmatParams {
    /// `2^scale` vertices.
    pub scale: u32,
    /// `edge_factor * 2^scale` edge insertions.
    pub edge_factor: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub seed: u64,
}

impl RmatParams {
    pub const DEFAULT_PROBS: (f64, f64, f64, f64) = (0.57, 0.19, 0.19, 0.05);

    pub fn new(scale: u32, edge_factor: usize, seed: u64) -> Self {
        let (a, b, c, d) = Self::DEFAULT_PROBS;
        Self {
            scale,
            edge_factor,
            a,
            b,
            c,
            d,
            seed,
        }
    }

    pub fn with_probs(mut self, a: f64, b: f64, c: f64, d: f64) -> Self {
        (self.a, self.b, self.c, self.d) = (a, b, c, d);
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.scale == 0 || self.scale > 40 {
            return Err(ConfigError::Invalid(format!(
                "RMAT scale {} outside 1..=40",
                self.scale
            )));
        }
        let p = [self.a, self.b, self.c, self.d];
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(ConfigError::Invalid(format!(
                "RMAT probabilities {p:?} outside [0, 1]"
            )));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::Invalid(format!(
                "RMAT probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    /// `scale,edge_factor,a,b,c,d,seed`.
    pub fn label(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.scale, self.edge_factor, self.a, self.b, self.c, self.d, self.seed
        )
    }
}

/// Places each edge by descending `scale` quadrant levels. Self-loops are
/// kept; repeated edges are summed, so values count multiplicity.
pub fn rmat_generate<T: Scalar>(p: &RmatParams) -> Result<CsrMatrix<T>, ConfigError> {
    p.validate()?;
    let n = 1usize << p.scale;
    let edges = p.edge_factor * n;
    let (ab, abc) = (p.a + p.b, p.a + p.b + p.c);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut entries = Vec::with_capacity(edges);
    for _ in 0..edges {
        let (mut r, mut c) = (0usize, 0usize);
        for level in (0..p.scale).rev() {
            let bit = 1usize << level;
            let q: f64 = rng.random();
            if q < p.a {
            } else if q < ab {
                c |= bit;
            } else if q < abc {
                r |= bit;
            } else {
                r |= bit;
                c |= bit;
            }
        }
        entries.push((r, c, T::one()));
    }
    Ok(CsrMatrix::from_coo(&entries, n, n).expect("indices below 2^scale"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_contract() {
        let a: CsrMatrix<f32> = rmat_generate(&RmatParams::new(10, 8, 42)).unwrap();
        assert_eq!(a.nrows(), 1024);
        assert_eq!(a.ncols(), 1024);
        assert!(a.nnz() <= 8192 && a.nnz() > 0);
        let total: f32 = a.values().iter().sum();
        assert_eq!(total, 8192.0);
        assert!(a.validate().is_ok());
    }

    #[test]
    fn deterministic() {
        let p = RmatParams::new(8, 4, 7);
        let a: CsrMatrix<f64> = rmat_generate(&p).unwrap();
        let b: CsrMatrix<f64> = rmat_generate(&p).unwrap();
        assert_eq!(a, b);
        let c: CsrMatrix<f64> = rmat_generate(&RmatParams { seed: 8, ..p }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn skew_raises_max_degree() {
        let base = RmatParams::new(12, 8, 3);
        let uniform: CsrMatrix<f32> =
            rmat_generate(&base.with_probs(0.25, 0.25, 0.25, 0.25)).unwrap();
        let skewed: CsrMatrix<f32> = rmat_generate(&base).unwrap();
        let ratio = |s: crate::csr::GraphStats| s.max_degree as f64 / s.avg_degree;
        let (ru, rs) = (ratio(uniform.stats()), ratio(skewed.stats()));
        assert!(rs > 4.0 * ru, "uniform {ru}, skewed {rs}");
    }

    #[test]
    fn bad_probabilities() {
        let p = RmatParams::new(4, 2, 0).with_probs(0.5, 0.5, 0.5, 0.0);
        assert!(rmat_generate::<f32>(&p).is_err());
        assert!(rmat_generate::<f32>(&RmatParams::new(0, 2, 0)).is_err());
    }
}
