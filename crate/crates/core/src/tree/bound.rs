use super::TreeError;

/// Hoeffding bound `sqrt(R² ln(1/δ) / 2n)`.
///
/// With probability `1 - delta` the true mean of a variable with range
/// `range` lies within the returned epsilon of the mean of `n` samples.
pub fn hoeffding_bound(range: f64, delta: f64, n: f64) -> Result<f64, TreeError> {
    if !(n > 0.0) {
        return Err(TreeError::EmptySample);
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(TreeError::InvalidParam("delta must lie in (0, 1)"));
    }
    if !(range > 0.0) {
        return Err(TreeError::InvalidParam("criterion range must be positive"));
    }
    Ok((range * range * (1.0 / delta).ln() / (2.0 * n)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with 40-digit arithmetic.
    const ORACLE: &[(f64, f64, f64, f64)] = &[
        (1.0, 1e-7, 200.0, 0.200_736_740_850_786_454_8),
        (1.0, 0.05, 1000.0, 0.038_702_275_602_049_493_66),
        (1.0, 1e-7, 10000.0, 0.028_388_462_137_775_550_69),
        (2.807_354_922_057_604, 1e-7, 200.0, 0.563_539_277_465_257_082_2),
        (2.0, 0.01, 3.0, 1.752_173_923_252_310_660),
        (1.0, 1e-7, 3400.0, 0.048_685_810_910_001_887_25),
        (0.5, 0.001, 123_456.0, 0.002_644_644_963_413_823_120),
    ];

    #[test]
    fn matches_high_precision_oracle() {
        for &(r, d, n, want) in ORACLE {
            let got = hoeffding_bound(r, d, n).unwrap();
            assert!((got - want).abs() < 1e-12, "R={r} δ={d} n={n}: {got} vs {want}");
        }
    }

    #[test]
    fn quadrupling_n_halves_epsilon() {
        let a = hoeffding_bound(1.0, 1e-7, 250.0).unwrap();
        let b = hoeffding_bound(1.0, 1e-7, 1000.0).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_sample_and_bad_params() {
        assert!(matches!(hoeffding_bound(1.0, 0.1, 0.0), Err(TreeError::EmptySample)));
        assert!(hoeffding_bound(1.0, 1.0, 10.0).is_err());
        assert!(hoeffding_bound(0.0, 0.1, 10.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn strictly_decreasing_in_n_increasing_in_range(
            n in 1.0f64..1e7, dn in 1.0f64..1e5, r in 0.1f64..5.0, dr in 0.01f64..2.0,
            delta in 1e-9f64..0.5,
        ) {
            let e = hoeffding_bound(r, delta, n).unwrap();
            proptest::prop_assert!(hoeffding_bound(r, delta, n + dn).unwrap() < e);
            proptest::prop_assert!(hoeffding_bound(r + dr, delta, n).unwrap() > e);
        }
    }
}
