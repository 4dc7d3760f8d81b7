//! The balance-factor loss over (edit distance, path probability) and the
//! A* score built from it.
//!
//! All logarithms are base 10. Probabilities are passed as `log10 p` so long
//! paths do not underflow.

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum LossError {
    #[error("balance factor {0} is outside [0, 1]")]
    Alpha(f64),
    #[error("log10 probability {0} is positive or NaN")]
    LogProbability(f64),
    #[error("edit distance {0} is negative or NaN")]
    Distance(f64),
}

/// Balance factor: `alpha = 1` weighs only edit distance, `alpha = 0` only
/// probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams {
    alpha: f64,
}

impl LossParams {
    pub fn new(alpha: f64) -> Result<Self, LossError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(LossError::Alpha(alpha));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Whether the distance term contributes.
    pub fn uses_distance(&self) -> bool {
        self.alpha > 0.0
    }

    /// Whether the probability term contributes.
    pub fn uses_probability(&self) -> bool {
        self.alpha < 1.0
    }
}

fn combine(d: f64, log_p: f64, params: LossParams) -> Result<f64, LossError> {
    if d.is_nan() || d < 0.0 {
        return Err(LossError::Distance(d));
    }
    if log_p.is_nan() || log_p > 0.0 {
        return Err(LossError::LogProbability(log_p));
    }
    let alpha = params.alpha;
    let dist = (d + 1.0).log10();
    let prob = 1.0 - log_p;
    Ok(if alpha == 1.0 {
        dist
    } else if alpha == 0.0 {
        prob
    } else if prob.is_infinite() {
        f64::INFINITY
    } else {
        dist.powf(alpha) * prob.powf(1.0 - alpha)
    })
}

/// Loss of an alignment with edit distance `d` and path probability `10^log_p`.
pub fn loss(d: u32, log_p: f64, params: LossParams) -> Result<f64, LossError> {
    combine(f64::from(d), log_p, params)
}

/// Search score: the loss of the accumulated values extended by the
/// heuristic estimates. `log_h_p = -inf` marks an unreachable goal and scores
/// `+inf` for every alpha.
pub fn f_score(
    g_d: f64,
    h_d: f64,
    log_g_p: f64,
    log_h_p: f64,
    params: LossParams,
) -> Result<f64, LossError> {
    if log_h_p == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    combine(g_d + h_d, log_g_p + log_h_p, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(alpha: f64) -> LossParams {
        LossParams::new(alpha).unwrap()
    }

    #[test]
    fn running_example_cells() {
        let p = (5.0f64 / 500.0).log10();
        assert!((loss(1, p, a(1.0)).unwrap() - 0.301).abs() < 5e-4);
        assert!((loss(1, p, a(0.0)).unwrap() - 3.000).abs() < 5e-4);
        let q = (198.0f64 / 500.0).log10();
        assert!((loss(2, q, a(0.5)).unwrap() - 0.818).abs() < 5e-4);
        for alpha in [0.1, 0.5, 0.9] {
            assert_eq!(loss(0, 0.0, a(alpha)).unwrap(), 0.0);
        }
    }

    #[test]
    fn f_score_examples() {
        for alpha in [0.0, 0.3, 1.0] {
            let f = f_score(0.0, 0.0, 0.0, 0.0, a(alpha)).unwrap();
            assert_eq!(f, if alpha == 0.0 { 1.0 } else { 0.0 });
        }
        let p = (5.0f64 / 500.0).log10();
        let at_goal = f_score(1.0, 0.0, p, 0.0, a(1.0)).unwrap();
        assert_eq!(at_goal, loss(1, p, a(1.0)).unwrap());
        assert!((at_goal - 0.301).abs() < 5e-4);
        let ahead = f_score(0.0, 1.0, 0.0, p, a(0.5)).unwrap();
        assert!((ahead - 0.950).abs() < 5e-4);
        assert_eq!(f_score(0.0, 0.0, 0.0, f64::NEG_INFINITY, a(1.0)).unwrap(), f64::INFINITY);
        assert_eq!(f_score(0.0, 0.0, 0.0, f64::NEG_INFINITY, a(0.5)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn domain_errors() {
        assert_eq!(LossParams::new(1.5), Err(LossError::Alpha(1.5)));
        assert_eq!(LossParams::new(-0.1), Err(LossError::Alpha(-0.1)));
        assert_eq!(loss(1, 0.1, a(0.5)), Err(LossError::LogProbability(0.1)));
        assert!(loss(1, f64::NAN, a(0.5)).is_err());
        assert!(f_score(-1.0, 0.0, 0.0, 0.0, a(0.5)).is_err());
    }

    fn log_prob() -> impl Strategy<Value = f64> {
        (1e-9f64..=1.0).prop_map(|p| p.log10())
    }

    proptest! {
        #[test]
        fn likelier_path_wins_at_equal_distance(
            d in 1u32..50, p1 in log_prob(), p2 in log_prob(), alpha in 0.0f64..1.0
        ) {
            prop_assume!((p1 - p2).abs() > 1e-9);
            let (hi, lo) = if p1 > p2 { (p1, p2) } else { (p2, p1) };
            prop_assert!(loss(d, hi, a(alpha)).unwrap() < loss(d, lo, a(alpha)).unwrap());
        }

        #[test]
        fn closer_path_wins_at_equal_probability(
            d1 in 0u32..50, d2 in 0u32..50, p in log_prob(), alpha in 1e-3f64..=1.0
        ) {
            prop_assume!(d1 != d2);
            let (lo, hi) = (d1.min(d2), d1.max(d2));
            prop_assert!(loss(lo, p, a(alpha)).unwrap() < loss(hi, p, a(alpha)).unwrap());
        }

        #[test]
        fn dominating_path_wins(
            d1 in 0u32..50, gap in 1u32..50, p1 in log_prob(), p2 in log_prob(), alpha in 1e-3f64..0.999
        ) {
            prop_assume!(p1 > p2 + 1e-9);
            prop_assert!(loss(d1, p1, a(alpha)).unwrap() < loss(d1 + gap, p2, a(alpha)).unwrap());
        }

        #[test]
        fn extreme_alphas_ignore_one_argument(d in 0u32..50, e in 0u32..50, p in log_prob(), q in log_prob()) {
            prop_assert_eq!(loss(d, p, a(1.0)).unwrap(), loss(d, q, a(1.0)).unwrap());
            prop_assert_eq!(loss(d, p, a(0.0)).unwrap(), loss(e, p, a(0.0)).unwrap());
        }

        #[test]
        fn f_score_is_monotone(
            g in 0.0f64..20.0, h in 0.0f64..20.0, extra in 0.0f64..5.0,
            lg in log_prob(), lh in log_prob(), drop in 0.0f64..3.0, alpha in 0.0f64..=1.0
        ) {
            let base = f_score(g, h, lg, lh, a(alpha)).unwrap();
            prop_assert!(f_score(g, h + extra, lg, lh, a(alpha)).unwrap() >= base);
            prop_assert!(f_score(g + extra, h, lg, lh, a(alpha)).unwrap() >= base);
            prop_assert!(f_score(g, h, lg, lh - drop, a(alpha)).unwrap() >= base);
            prop_assert!(f_score(g, h, lg - drop, lh, a(alpha)).unwrap() >= base);
        }
    }
}
