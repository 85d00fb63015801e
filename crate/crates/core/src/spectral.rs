//! One-sided power spectral density of concatenated scenarios.
//!
//! Both estimators remove the mean of every segment, drop the DC bin and
//! scale so that `sum(psd) * df` equals the (population) variance of the
//! input, up to window effects for Welch. Frequencies are in 1/h and the PSD
//! in signal² h.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, ScenarioSet, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Periodogram,
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// Periodic Hann, `0.5 - 0.5 cos(2 pi n / L)`.
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; len],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelchMeta {
    pub segment_len: usize,
    pub overlap_fraction: f64,
    pub window: Window,
    pub n_segments: usize,
    /// Set when the series only held one segment.
    pub single_segment: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub psd: Vec<f64>,
    /// `1 / frequency`, in hours.
    pub periods: Vec<f64>,
    pub flagged: Vec<bool>,
    /// Periods above this bound are flagged; `None` when nothing is.
    pub flag_bound: Option<f64>,
    pub dt: f64,
    pub method: Method,
    pub welch: Option<WelchMeta>,
}

impl Spectrum {
    /// Frequency spacing of the bins.
    pub fn df(&self) -> f64 {
        self.frequencies[0]
    }

    /// `sum(psd) * df`, the variance captured by the spectrum.
    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.df()
    }

    pub fn peak_frequency(&self) -> f64 {
        let i = self
            .psd
            .iter()
            .enumerate()
            .fold(0, |best, (i, &p)| if p > self.psd[best] { i } else { best });
        self.frequencies[i]
    }

    /// Keeps only bins whose period lies in `[min_period, max_period]`.
    pub fn restrict_periods(&self, min_period: f64, max_period: f64) -> Spectrum {
        let keep: Vec<usize> = (0..self.periods.len())
            .filter(|&i| self.periods[i] >= min_period && self.periods[i] <= max_period)
            .collect();
        let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Spectrum {
            frequencies: pick(&self.frequencies),
            psd: pick(&self.psd),
            periods: pick(&self.periods),
            flagged: keep.iter().map(|&i| self.flagged[i]).collect(),
            ..self.clone()
        }
    }
}

/// Power in bins `1..=L/2` of one mean-removed, windowed segment, without
/// the final `1 / sum(w^2)` normalization.
struct SegmentTransform {
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    window: Vec<f64>,
    buf: Vec<Complex<f64>>,
}

impl SegmentTransform {
    fn new(len: usize, window: Window) -> Self {
        Self {
            fft: FftPlanner::new().plan_fft_forward(len),
            window: window.coefficients(len),
            buf: vec![Complex::default(); len],
        }
    }

    fn window_power(&self) -> f64 {
        self.window.iter().map(|w| w * w).sum()
    }

    fn accumulate(&mut self, segment: &[f64], dt: f64, out: &mut [f64]) {
        let len = segment.len();
        let mean = segment.iter().sum::<f64>() / len as f64;
        for ((b, &x), &w) in self.buf.iter_mut().zip(segment).zip(&self.window) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        self.fft.process(&mut self.buf);
        for (k, o) in (1..=len / 2).zip(out.iter_mut()) {
            let one_sided = if 2 * k == len { 1.0 } else { 2.0 };
            *o += one_sided * self.buf[k].norm_sqr() * dt;
        }
    }
}

fn frequency_axes(len: usize, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let duration = len as f64 * dt;
    (1..=len / 2)
        .map(|k| (k as f64 / duration, duration / k as f64))
        .unzip()
}

fn flags(periods: &[f64], scenario_len: usize, dt: f64) -> (Vec<bool>, Option<f64>) {
    if scenario_len == 0 {
        return (vec![false; periods.len()], None);
    }
    let bound = scenario_len as f64 * dt / 2.0;
    (periods.iter().map(|&p| p > bound).collect(), Some(bound))
}

fn check_series(ts: &TimeSeries) -> Result<()> {
    if ts.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "spectrum needs at least 4 samples, got {}",
            ts.len()
        )));
    }
    let v = ts.values();
    if v.iter().all(|&x| x == v[0]) {
        return Err(Error::Degenerate("constant series has no spectrum".into()));
    }
    Ok(())
}

/// Single-segment periodogram of the whole series.
pub fn periodogram(ts: &TimeSeries) -> Result<Spectrum> {
    check_series(ts)?;
    let n = ts.len();
    let mut transform = SegmentTransform::new(n, Window::Rectangular);
    let mut psd = vec![0.0; n / 2];
    transform.accumulate(ts.values(), ts.dt(), &mut psd);
    let norm = transform.window_power();
    psd.iter_mut().for_each(|p| *p /= norm);
    let (frequencies, periods) = frequency_axes(n, ts.dt());
    let (flagged, flag_bound) = flags(&periods, ts.scenario_len(), ts.dt());
    Ok(Spectrum {
        frequencies,
        psd,
        periods,
        flagged,
        flag_bound,
        dt: ts.dt(),
        method: Method::Periodogram,
        welch: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WelchParams {
    /// Samples per segment; twice the scenario length if unset.
    pub segment_len: Option<usize>,
    pub overlap_fraction: f64,
    pub window: Window,
}

impl Default for WelchParams {
    fn default() -> Self {
        Self {
            segment_len: None,
            overlap_fraction: 0.5,
            window: Window::Hann,
        }
    }
}

impl WelchParams {
    fn resolve_segment_len(&self, ts: &TimeSeries) -> Result<usize> {
        match self.segment_len {
            Some(len) => Ok(len),
            None if ts.scenario_len() > 0 => Ok(2 * ts.scenario_len()),
            None => Err(Error::InvalidConfig(
                "segment length is required for series without scenario structure".into(),
            )),
        }
    }
}

/// Welch estimate: mean of windowed periodograms of overlapping segments.
pub fn welch_psd(ts: &TimeSeries, params: &WelchParams) -> Result<Spectrum> {
    check_series(ts)?;
    let n = ts.len();
    let seg = params.resolve_segment_len(ts)?;
    if seg < 4 || seg > n {
        return Err(Error::InvalidConfig(format!(
            "segment length {seg} must be in 4..={n}"
        )));
    }
    if !(0.0..1.0).contains(&params.overlap_fraction) {
        return Err(Error::InvalidConfig(format!(
            "overlap fraction must be in [0, 1), got {}",
            params.overlap_fraction
        )));
    }
    let overlap = (seg as f64 * params.overlap_fraction).floor() as usize;
    let step = (seg - overlap).max(1);
    let n_segments = (n - seg) / step + 1;

    let mut transform = SegmentTransform::new(seg, params.window);
    let mut psd = vec![0.0; seg / 2];
    for i in 0..n_segments {
        let start = i * step;
        transform.accumulate(&ts.values()[start..start + seg], ts.dt(), &mut psd);
    }
    let norm = transform.window_power() * n_segments as f64;
    psd.iter_mut().for_each(|p| *p /= norm);

    let (frequencies, periods) = frequency_axes(seg, ts.dt());
    let (flagged, flag_bound) = flags(&periods, ts.scenario_len(), ts.dt());
    Ok(Spectrum {
        frequencies,
        psd,
        periods,
        flagged,
        flag_bound,
        dt: ts.dt(),
        method: Method::Welch,
        welch: Some(WelchMeta {
            segment_len: seg,
            overlap_fraction: params.overlap_fraction,
            window: params.window,
            n_segments,
            single_segment: n_segments < 2,
        }),
    })
}

/// Flags bins whose period exceeds half the scenario duration. A
/// `scenario_len` of 0 clears all flags.
pub fn flag_periods(spec: &Spectrum, scenario_len: usize, dt: f64) -> Spectrum {
    let (flagged, flag_bound) = flags(&spec.periods, scenario_len, dt);
    Spectrum {
        flagged,
        flag_bound,
        ..spec.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    pub reference: Spectrum,
    pub candidate: Spectrum,
    /// Shortest reported period, `2 dt`.
    pub min_period: f64,
    /// Longest reported period, one scenario duration.
    pub max_period: f64,
}

/// Welch spectra of both concatenated sets on a shared frequency grid,
/// restricted to periods between the Nyquist limit and the scenario length.
pub fn psd_report(
    reference: &ScenarioSet,
    candidate: &ScenarioSet,
    params: &WelchParams,
) -> Result<PsdReport> {
    if reference.dt() != candidate.dt() {
        return Err(Error::DtMismatch(reference.dt(), candidate.dt()));
    }
    if reference.scenario_len() != candidate.scenario_len() {
        return Err(Error::LengthMismatch(
            reference.scenario_len(),
            candidate.scenario_len(),
        ));
    }
    let t = reference.scenario_len();
    let dt = reference.dt();
    let ref_ts = reference.concatenate();
    let cand_ts = candidate.concatenate();
    let params = WelchParams {
        segment_len: Some(
            params
                .segment_len
                .unwrap_or_else(|| (2 * t).min(ref_ts.len()).min(cand_ts.len())),
        ),
        ..params.clone()
    };
    let (min_period, max_period) = (2.0 * dt, t as f64 * dt);
    let spectrum = |ts: &TimeSeries| -> Result<Spectrum> {
        let s = welch_psd(ts, &params)?;
        Ok(flag_periods(&s, t, dt).restrict_periods(min_period, max_period))
    };
    Ok(PsdReport {
        reference: spectrum(&ref_ts)?,
        candidate: spectrum(&cand_ts)?,
        min_period,
        max_period,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate_with_dt, GeneratorKind, GeneratorSpec};
    use proptest::prelude::*;

    fn series(kind: GeneratorKind, n: usize, seed: u64, dt: f64) -> TimeSeries {
        generate_with_dt(&GeneratorSpec { kind, n, seed }, dt).unwrap()
    }

    fn sine(n: usize) -> TimeSeries {
        // 6 h period at 15 min sampling
        series(
            GeneratorKind::Sine {
                amplitude: 1.5,
                period_steps: 24.0,
            },
            n,
            0,
            0.25,
        )
    }

    fn population_variance(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
    }

    /// Direct O(N^2) DFT periodogram, independent of the FFT path.
    fn dft_periodogram(x: &[f64], dt: f64) -> Vec<f64> {
        let n = x.len();
        let m = x.iter().sum::<f64>() / n as f64;
        (1..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, v) in x.iter().enumerate() {
                    let arg = -2.0 * PI * (k * t % n) as f64 / n as f64;
                    re += (v - m) * arg.cos();
                    im += (v - m) * arg.sin();
                }
                let c = if 2 * k == n { 1.0 } else { 2.0 };
                c * (re * re + im * im) * dt / n as f64
            })
            .collect()
    }

    #[test]
    fn periodogram_matches_direct_dft() {
        let ts = series(GeneratorKind::WhiteGaussian { sigma: 1.0 }, 250, 4, 0.5);
        let fast = periodogram(&ts).unwrap();
        let slow = dft_periodogram(ts.values(), 0.5);
        for (a, b) in fast.psd.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-3));
        }
        assert_eq!(fast.frequencies.len(), 125);
    }

    #[test]
    fn sine_peak_and_parseval() {
        let ts = sine(4096);
        let p = periodogram(&ts).unwrap();
        assert!((p.peak_frequency() - 1.0 / 6.0).abs() <= p.df());
        assert!((p.total_power() / (1.5f64 * 1.5 / 2.0) - 1.0).abs() <= 0.02);

        let w = welch_psd(
            &ts,
            &WelchParams {
                segment_len: Some(192),
                ..Default::default()
            },
        )
        .unwrap();
        assert!((w.peak_frequency() - 1.0 / 6.0).abs() <= w.df());
        assert!((w.total_power() / population_variance(ts.values()) - 1.0).abs() <= 0.05);
    }

    #[test]
    fn white_noise_is_flat() {
        let ts = series(GeneratorKind::WhiteGaussian { sigma: 1.0 }, 1 << 14, 8, 1.0);
        let p = periodogram(&ts).unwrap();
        let bands: Vec<f64> = p
            .psd
            .chunks(p.psd.len() / 32)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        let mean = bands.iter().sum::<f64>() / bands.len() as f64;
        let max = bands.iter().cloned().fold(0.0, f64::max);
        assert!(max / mean <= 2.0);
    }

    fn spread(x: &[f64]) -> f64 {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v / m - 1.0).powi(2)).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn welch_smooths_white_noise() {
        for seed in 0..10 {
            let ts = series(GeneratorKind::WhiteGaussian { sigma: 1.0 }, 4096, seed, 1.0);
            let p = periodogram(&ts).unwrap();
            let w = welch_psd(
                &ts,
                &WelchParams {
                    segment_len: Some(256),
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(spread(&w.psd) < spread(&p.psd), "seed {seed}");
        }
    }

    #[test]
    fn welch_single_segment_rectangular_is_periodogram() {
        let ts = series(GeneratorKind::Ar1 { sigma: 1.0, phi: 0.5 }, 512, 2, 0.25);
        let p = periodogram(&ts).unwrap();
        let w = welch_psd(
            &ts,
            &WelchParams {
                segment_len: Some(512),
                overlap_fraction: 0.0,
                window: Window::Rectangular,
            },
        )
        .unwrap();
        assert!(w.welch.as_ref().unwrap().single_segment);
        for (a, b) in w.psd.iter().zip(&p.psd) {
            assert!((a - b).abs() <= 1e-9 * b);
        }
    }

    #[test]
    fn welch_errors() {
        let ts = sine(100);
        let with = |segment_len, overlap_fraction| WelchParams {
            segment_len,
            overlap_fraction,
            window: Window::Hann,
        };
        assert!(welch_psd(&ts, &with(Some(101), 0.5)).is_err());
        assert!(welch_psd(&ts, &with(Some(50), 1.0)).is_err());
        assert!(welch_psd(&ts, &with(None, 0.5)).is_err());
        let flat = TimeSeries::new(vec![1.0; 64], 1.0).unwrap();
        assert!(matches!(periodogram(&flat), Err(Error::Degenerate(_))));
    }

    #[test]
    fn flag_rule() {
        let ts = TimeSeries::with_scenario_len(
            sine(96 * 20).into_values(),
            0.25,
            96,
        )
        .unwrap();
        let w = welch_psd(&ts, &WelchParams::default()).unwrap();
        assert_eq!(w.flag_bound, Some(12.0));
        for (p, f) in w.periods.iter().zip(&w.flagged) {
            assert_eq!(*f, *p > 12.0);
        }
        let at = |period: f64| w.periods.iter().position(|p| *p == period).unwrap();
        assert!(w.flagged[at(24.0)]);
        assert!(!w.flagged[at(12.0)]);
        assert!(!w.flagged[at(6.0)]);

        let cleared = flag_periods(&w, 0, 0.25);
        assert!(cleared.flagged.iter().all(|f| !f));
    }

    fn noise_set(seed: u64, sigma: f64) -> ScenarioSet {
        let ts = series(GeneratorKind::Ar1 { sigma, phi: 0.9 }, 96 * 60, seed, 0.25);
        ScenarioSet::from_flat(ts.into_values(), 96, 0.25).unwrap()
    }

    #[test]
    fn report_range_and_identity() {
        let set = noise_set(1, 1.0);
        let r = psd_report(&set, &set, &WelchParams::default()).unwrap();
        assert_eq!(r.reference, r.candidate);
        assert_eq!(r.min_period, 0.5);
        assert_eq!(r.max_period, 24.0);
        assert_eq!(*r.reference.periods.first().unwrap(), 24.0);
        assert_eq!(*r.reference.periods.last().unwrap(), 0.5);

        let coarse = ScenarioSet::from_flat(set.as_flat().to_vec(), 96, 0.5).unwrap();
        assert!(matches!(
            psd_report(&set, &coarse, &WelchParams::default()),
            Err(Error::DtMismatch(..))
        ));
    }

    #[test]
    fn added_noise_raises_high_frequencies() {
        let reference = noise_set(2, 0.1);
        let extra = series(GeneratorKind::WhiteGaussian { sigma: 0.05 }, 96 * 60, 77, 0.25);
        let candidate = ScenarioSet::from_flat(
            reference
                .as_flat()
                .iter()
                .zip(extra.values())
                .map(|(a, b)| a + b)
                .collect(),
            96,
            0.25,
        )
        .unwrap();
        let r = psd_report(&reference, &candidate, &WelchParams::default()).unwrap();
        // expected white-noise floor added: 2 sigma^2 dt
        let floor = 2.0 * 0.05f64.powi(2) * 0.25;
        for i in 0..r.reference.psd.len() {
            if r.reference.periods[i] <= 2.0 {
                assert!(r.candidate.psd[i] >= r.reference.psd[i] - 0.5 * floor, "bin {i}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn parseval_periodogram(seed in 0u64..10_000, n in 8usize..600) {
            let ts = series(GeneratorKind::Ar1 { sigma: 1.0, phi: 0.6 }, n, seed, 0.25);
            let p = periodogram(&ts).unwrap();
            let var = population_variance(ts.values());
            prop_assert!((p.total_power() - var).abs() <= 0.02 * var);
            prop_assert!(p.frequencies.iter().all(|f| *f <= 1.0 / (2.0 * 0.25) + 1e-12));
        }

        #[test]
        fn scale_and_mean(seed in 0u64..10_000, a in -20.0f64..20.0, c in -50.0f64..50.0) {
            prop_assume!(a.abs() > 0.01);
            let ts = series(GeneratorKind::WhiteGaussian { sigma: 1.0 }, 384, seed, 0.25);
            let params = WelchParams { segment_len: Some(96), ..Default::default() };
            let base = welch_psd(&ts, &params).unwrap();
            let scaled = TimeSeries::new(ts.values().iter().map(|v| a * v).collect(), 0.25).unwrap();
            let shifted = TimeSeries::new(ts.values().iter().map(|v| v + c).collect(), 0.25).unwrap();
            let s = welch_psd(&scaled, &params).unwrap();
            let m = welch_psd(&shifted, &params).unwrap();
            for i in 0..base.psd.len() {
                prop_assert!((s.psd[i] - a * a * base.psd[i]).abs() <= 1e-9 * a * a * base.psd[i]);
                prop_assert!((m.psd[i] - base.psd[i]).abs() <= 1e-9 * base.psd[i].max(1e-3));
            }
        }
    }
}
