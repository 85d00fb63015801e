//! Per-scenario autocorrelation and the best-match comparison of ACFs.
//!
//! The ACF uses the scenario's own mean and population variance and the
//! biased auto-covariance (divisor `T` at every lag), so `R(0) = 1` and
//! `|R(tau)| <= 1`.

use rand::seq::index;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, ScenarioSet};

/// Attached to every ACF panel.
pub const MATCHING_CAVEAT: &str = "best-match ACF comparison inspects only the selected reference \
scenarios and their closest candidates; the rest of the candidate set, including outliers, is \
excluded, and matching ACFs do not imply that the series come from the same process";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfCurve {
    pub scenario_index: usize,
    /// Lags `0..=L` in time steps.
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
}

impl AcfCurve {
    pub fn max_lag(&self) -> usize {
        self.lags.len() - 1
    }
}

/// Pearson autocorrelation of one scenario for lags `0..=max_lag`.
pub fn acf(scenario: &[f64], max_lag: usize) -> Result<AcfCurve> {
    let t = scenario.len();
    if t < 2 {
        return Err(Error::InvalidInput(format!(
            "scenario needs at least 2 samples, got {t}"
        )));
    }
    if max_lag == 0 || max_lag >= t {
        return Err(Error::InvalidInput(format!(
            "max lag must be in 1..={}, got {max_lag}",
            t - 1
        )));
    }
    if scenario.iter().all(|&v| v == scenario[0]) {
        return Err(Error::Degenerate(
            "constant scenario has no autocorrelation".into(),
        ));
    }
    let n = t as f64;
    let mean = scenario.iter().sum::<f64>() / n;
    let centered: Vec<f64> = scenario.iter().map(|v| v - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..t - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n
    };
    let variance = autocov(0);
    if !(variance > 0.0) {
        return Err(Error::Degenerate("scenario variance is zero".into()));
    }
    Ok(AcfCurve {
        scenario_index: 0,
        lags: (0..=max_lag).collect(),
        values: (0..=max_lag).map(|lag| autocov(lag) / variance).collect(),
    })
}

/// Mean squared difference over all lags, lag 0 included.
pub fn acf_mse(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub reference_index: usize,
    pub best_candidate_index: usize,
    pub mse: f64,
    /// MSEs of every other usable candidate, ascending.
    pub runner_up_mses: Vec<f64>,
    /// Constant candidates that were not considered.
    pub skipped_degenerate: usize,
}

/// ACFs of every usable scenario of a candidate set, computed once for
/// repeated best-match queries.
#[derive(Debug, Clone)]
pub struct AcfIndex {
    max_lag: usize,
    curves: Vec<AcfCurve>,
    skipped: usize,
}

impl AcfIndex {
    pub fn new(candidates: &ScenarioSet, max_lag: usize) -> Result<Self> {
        let results: Vec<Result<AcfCurve>> = (0..candidates.n_scenarios())
            .into_par_iter()
            .map(|i| {
                acf(candidates.scenario(i), max_lag).map(|mut c| {
                    c.scenario_index = i;
                    c
                })
            })
            .collect();
        let mut curves = Vec::with_capacity(results.len());
        let mut skipped = 0;
        for r in results {
            match r {
                Ok(c) => curves.push(c),
                Err(Error::Degenerate(_)) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        if curves.is_empty() {
            return Err(Error::Degenerate(format!(
                "all {skipped} candidate scenarios are constant"
            )));
        }
        Ok(Self {
            max_lag,
            curves,
            skipped,
        })
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// Curve for candidate `index`, if that candidate was usable.
    pub fn curve(&self, index: usize) -> Option<&AcfCurve> {
        self.curves
            .binary_search_by_key(&index, |c| c.scenario_index)
            .ok()
            .map(|i| &self.curves[i])
    }

    /// Candidate whose ACF has the smallest MSE to `reference`; ties go to
    /// the lowest index.
    pub fn best_match(&self, reference: &AcfCurve) -> Result<MatchResult> {
        if reference.max_lag() != self.max_lag {
            return Err(Error::InvalidInput(format!(
                "reference ACF has max lag {}, index uses {}",
                reference.max_lag(),
                self.max_lag
            )));
        }
        let mses: Vec<f64> = self
            .curves
            .par_iter()
            .map(|c| acf_mse(&reference.values, &c.values))
            .collect();
        let best = mses
            .iter()
            .enumerate()
            .fold(0, |best, (i, &m)| if m < mses[best] { i } else { best });
        let mut runner_up_mses: Vec<f64> = mses
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != best)
            .map(|(_, &m)| m)
            .collect();
        runner_up_mses.sort_by(f64::total_cmp);
        Ok(MatchResult {
            reference_index: reference.scenario_index,
            best_candidate_index: self.curves[best].scenario_index,
            mse: mses[best],
            runner_up_mses,
            skipped_degenerate: self.skipped,
        })
    }
}

/// Searches `candidates` for the scenario whose ACF is closest to that of
/// `reference`.
pub fn best_match_by_acf(
    reference: &[f64],
    candidates: &ScenarioSet,
    max_lag: usize,
) -> Result<MatchResult> {
    let curve = acf(reference, max_lag)?;
    AcfIndex::new(candidates, max_lag)?.best_match(&curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfPair {
    pub reference: AcfCurve,
    pub matched: AcfCurve,
    pub result: MatchResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfPanel {
    pub pairs: Vec<AcfPair>,
    pub max_lag: usize,
    pub seed: u64,
    /// Constant reference scenarios that could not be drawn.
    pub skipped_reference: usize,
    pub skipped_candidates: usize,
    pub caveat: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcfParams {
    pub n_examples: usize,
    /// Defaults to `T - 1`.
    pub max_lag: Option<usize>,
}

impl Default for AcfParams {
    fn default() -> Self {
        Self {
            n_examples: 4,
            max_lag: None,
        }
    }
}

/// Draws `n_examples` reference scenarios uniformly without replacement and
/// pairs each with its best-matching candidate.
pub fn acf_panel(
    reference: &ScenarioSet,
    candidates: &ScenarioSet,
    n_examples: usize,
    max_lag: Option<usize>,
    seed: u64,
) -> Result<AcfPanel> {
    if reference.scenario_len() != candidates.scenario_len() {
        return Err(Error::LengthMismatch(
            reference.scenario_len(),
            candidates.scenario_len(),
        ));
    }
    let max_lag = max_lag.unwrap_or(reference.scenario_len() - 1);
    if n_examples == 0 || n_examples > reference.n_scenarios() {
        return Err(Error::InvalidInput(format!(
            "cannot draw {n_examples} examples from {} reference scenarios",
            reference.n_scenarios()
        )));
    }
    let mut usable = Vec::new();
    for i in 0..reference.n_scenarios() {
        match acf(reference.scenario(i), max_lag) {
            Ok(mut c) => {
                c.scenario_index = i;
                usable.push(c);
            }
            Err(Error::Degenerate(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let skipped_reference = reference.n_scenarios() - usable.len();
    if n_examples > usable.len() {
        return Err(Error::Degenerate(format!(
            "only {} of {} reference scenarios are non-constant, {n_examples} requested",
            usable.len(),
            reference.n_scenarios()
        )));
    }
    let index = AcfIndex::new(candidates, max_lag)?;
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let picks = index::sample(&mut rng, usable.len(), n_examples);
    let mut pairs = Vec::with_capacity(n_examples);
    for pick in picks.iter() {
        let curve = usable[pick].clone();
        let result = index.best_match(&curve)?;
        let matched = index
            .curve(result.best_candidate_index)
            .expect("matched candidate is indexed")
            .clone();
        pairs.push(AcfPair {
            reference: curve,
            matched,
            result,
        });
    }
    Ok(AcfPanel {
        pairs,
        max_lag,
        seed,
        skipped_reference,
        skipped_candidates: index.skipped(),
        caveat: MATCHING_CAVEAT.to_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, GeneratorKind, GeneratorSpec};
    use proptest::prelude::*;

    fn series(kind: GeneratorKind, n: usize, seed: u64) -> Vec<f64> {
        generate(&GeneratorSpec { kind, n, seed }).unwrap().into_values()
    }

    #[test]
    fn lag_zero_is_one() {
        let c = acf(&[0.3, 1.0, -2.0, 0.7, 0.1], 4).unwrap();
        assert_eq!(c.values[0], 1.0);
        assert_eq!(c.lags, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn hand_computed_biased_estimate() {
        // x = [1, 2, 3, 4]: mean 2.5, centered [-1.5, -0.5, 0.5, 1.5], var = 5/4
        // lag 1: (0.75 - 0.25 + 0.75) / 4 = 0.3125 -> 0.25
        let c = acf(&[1.0, 2.0, 3.0, 4.0], 3).unwrap();
        assert!((c.values[1] - 0.25).abs() < 1e-15);
        // lag 3: -2.25 / 4 / 1.25 = -0.45
        assert!((c.values[3] + 0.45).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(matches!(acf(&[2.0; 6], 3), Err(Error::Degenerate(_))));
        assert!(acf(&[1.0, 2.0, 3.0], 3).is_err());
        assert!(acf(&[1.0, 2.0, 3.0], 0).is_err());
        let constant = ScenarioSet::from_rows(&[[1.0; 4], [2.0; 4]], 1.0).unwrap();
        assert!(matches!(
            best_match_by_acf(&[1.0, 3.0, 2.0, 4.0], &constant, 3),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn ar1_matches_analytic_acf() {
        let x = series(GeneratorKind::Ar1 { sigma: 1.0, phi: 0.8 }, 100_000, 7);
        let c = acf(&x, 10).unwrap();
        for (lag, r) in c.values.iter().enumerate() {
            assert!((r - 0.8f64.powi(lag as i32)).abs() <= 0.02, "lag {lag}: {r}");
        }
    }

    #[test]
    fn white_noise_is_uncorrelated() {
        let x = series(GeneratorKind::WhiteGaussian { sigma: 1.0 }, 10_000, 11);
        let c = acf(&x, 20).unwrap();
        assert!(c.values[1..].iter().all(|r| r.abs() <= 0.05));
    }

    #[test]
    fn self_match_and_offset_tie() {
        let r = [0.1, 0.5, 0.2, 0.9, 0.4, 0.3];
        let shifted: Vec<f64> = r.iter().map(|v| v + 3.0).collect();
        let other = [0.9, 0.1, 0.8, 0.2, 0.7, 0.3];
        let set = ScenarioSet::from_rows(&[&other[..], &r[..], &shifted[..]], 1.0).unwrap();
        let m = best_match_by_acf(&r, &set, 5).unwrap();
        assert_eq!(m.best_candidate_index, 1);
        assert_eq!(m.mse, 0.0);
        assert!(m.runner_up_mses[0] < 1e-20);
        assert!(m.mse <= m.runner_up_mses[0]);
    }

    #[test]
    fn ar1_candidate_beats_white_noise() {
        let t = 4096;
        let reference = series(GeneratorKind::Ar1 { sigma: 1.0, phi: 0.8 }, t, 1);
        let ar = series(GeneratorKind::Ar1 { sigma: 1.0, phi: 0.8 }, t, 2);
        let wn = series(GeneratorKind::WhiteGaussian { sigma: 1.0 }, t, 3);
        let set = ScenarioSet::from_rows(&[wn, ar], 1.0).unwrap();
        let m = best_match_by_acf(&reference, &set, 40).unwrap();
        assert_eq!(m.best_candidate_index, 1);
    }

    #[test]
    fn skips_constant_candidates() {
        let set = ScenarioSet::from_rows(&[[1.0; 4], [1.0, 2.0, 1.0, 3.0]], 1.0).unwrap();
        let m = best_match_by_acf(&[1.0, 2.0, 1.0, 3.0], &set, 3).unwrap();
        assert_eq!(m.best_candidate_index, 1);
        assert_eq!(m.skipped_degenerate, 1);
    }

    fn noise_set(s: usize, t: usize, seed: u64) -> ScenarioSet {
        let x = series(GeneratorKind::WhiteGaussian { sigma: 1.0 }, s * t, seed);
        ScenarioSet::from_flat(x, t, 0.25).unwrap()
    }

    #[test]
    fn panel_properties() {
        let set = noise_set(6, 24, 5);
        let all = acf_panel(&set, &set, 6, None, 9).unwrap();
        let mut refs: Vec<usize> = all.pairs.iter().map(|p| p.reference.scenario_index).collect();
        refs.sort();
        assert_eq!(refs, (0..6).collect::<Vec<_>>());
        assert!(all.pairs.iter().all(|p| p.result.mse == 0.0));
        assert_eq!(all.max_lag, 23);
        assert_eq!(all.caveat, MATCHING_CAVEAT);

        let other = noise_set(30, 24, 6);
        let a = acf_panel(&set, &other, 3, Some(10), 42).unwrap();
        let b = acf_panel(&set, &other, 3, Some(10), 42).unwrap();
        assert_eq!(a, b);
        assert!(acf_panel(&set, &other, 7, None, 1).is_err());
    }

    proptest! {
        #[test]
        fn affine_invariant(
            x in prop::collection::vec(-5.0f64..5.0, 8..64),
            a in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
            b in -100.0f64..100.0,
        ) {
            prop_assume!(x.iter().any(|v| (v - x[0]).abs() > 1e-3));
            let lag = x.len() - 1;
            let base = acf(&x, lag).unwrap();
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let moved = acf(&y, lag).unwrap();
            for (p, q) in base.values.iter().zip(&moved.values) {
                prop_assert!((p - q).abs() <= 1e-9);
            }
            prop_assert!(base.values.iter().all(|r| r.abs() <= 1.0 + 1e-9));
        }

        #[test]
        fn permutation_consistent(seed in 0u64..1000, shift in 1usize..9) {
            let set = noise_set(10, 16, seed);
            let rows: Vec<Vec<f64>> = set.scenarios().map(<[f64]>::to_vec).collect();
            let mut rotated = rows.clone();
            rotated.rotate_left(shift);
            let permuted = ScenarioSet::from_rows(&rotated, 0.25).unwrap();
            let query = noise_set(1, 16, seed + 5000);
            let a = best_match_by_acf(query.scenario(0), &set, 15).unwrap();
            let b = best_match_by_acf(query.scenario(0), &permuted, 15).unwrap();
            prop_assert_eq!(a.mse, b.mse);
            prop_assert_eq!(rows[a.best_candidate_index].clone(), rotated[b.best_candidate_index].clone());
        }
    }
}
