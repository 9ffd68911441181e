use super::DatagenError;
use rand::Rng;

/// Zipf law over ranks `0..d`: `P(r) ∝ 1/(r+1)^skew`, sampled by binary
/// search in a precomputed cumulative table.
#[derive(Clone, Debug)]
pub struct Zipf {
    cdf: Vec<f64>,
    skew: f64,
}

impl Zipf {
    pub fn new(skew: f64, d: usize) -> Result<Self, DatagenError> {
        if d == 0 {
            return Err(DatagenError::Invalid("Zipf support must have at least one rank"));
        }
        if !(skew > 0.0) || !skew.is_finite() {
            return Err(DatagenError::Invalid("Zipf skew must be positive"));
        }
        let mut cdf = Vec::with_capacity(d);
        let mut acc = 0.0;
        for r in 0..d {
            acc += ((r + 1) as f64).powf(-skew);
            cdf.push(acc);
        }
        let total = acc;
        for c in &mut cdf {
            *c /= total;
        }
        cdf[d - 1] = 1.0;
        Ok(Self { cdf, skew })
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    pub fn skew(&self) -> f64 {
        self.skew
    }

    pub fn pmf(&self, rank: usize) -> f64 {
        match rank {
            0 => self.cdf[0],
            r if r < self.cdf.len() => self.cdf[r] - self.cdf[r - 1],
            _ => 0.0,
        }
    }

    /// `P(R <= rank)`.
    pub fn cdf(&self, rank: usize) -> f64 {
        self.cdf[rank.min(self.cdf.len() - 1)]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

/// One draw from Zipf(`skew`) over `0..d`. Builds the table each call; keep
/// a [`Zipf`] around for repeated sampling.
pub fn zipf_sample<R: Rng + ?Sized>(skew: f64, d: usize, rng: &mut R) -> Result<usize, DatagenError> {
    Ok(Zipf::new(skew, d)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_rank_always_zero() {
        let z = Zipf::new(1.5, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| z.sample(&mut rng) == 0));
    }

    #[test]
    fn head_ratio_is_closed_form() {
        let z = Zipf::new(1.5, 100).unwrap();
        assert!((z.pmf(0) / z.pmf(1) - 2f64.powf(1.5)).abs() < 1e-12);
        assert!((2f64.powf(1.5) - 2.828).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Zipf::new(1.5, 0).is_err());
        assert!(Zipf::new(0.0, 10).is_err());
        assert!(Zipf::new(f64::NAN, 10).is_err());
    }
}
