//! Periodic data-loss model.
//!
//! Loss is a multiplicative mask `L(t)` applied to every wave sample that
//! crosses the channel. The ideal mask is a pulse train that is `0` for
//! `alpha` seconds at the start of each period `T` and `1` otherwise. The same
//! mask can be approximated by a truncated Fourier series, either with the
//! closed-form coefficients as they are usually quoted (no DC term, `(-1)^n`
//! in `b_n`) or with coefficients recomputed from the defining integrals.

use std::f64::consts::PI;
use std::io::{self, Write};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("period must be positive and finite, got {0}")]
    InvalidPeriod(f64),
    #[error("loss width must satisfy 0 <= alpha < period, got alpha={alpha} period={period}")]
    InvalidWidth { alpha: f64, period: f64 },
    #[error("harmonic count must be at least 1")]
    NoHarmonics,
    #[error("harmonic index must be at least 1 for this coefficient convention")]
    ZeroHarmonic,
    #[error("phase must be finite, got {0}")]
    InvalidPhase(f64),
    #[error("{0:?} mode has no Fourier series")]
    NotASeries(LossMode),
}

/// How `L(t)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LossMode {
    /// Exact pulse train with values in `{0, 1}`.
    #[default]
    IdealPulse,
    /// Truncated series with the closed-form coefficients as quoted, no DC term.
    FourierPaper,
    /// Truncated series with coefficients recomputed from the pulse, including DC.
    FourierCorrected,
    /// `FourierCorrected` clipped to `[0, 1]`.
    FourierClamped,
}

impl LossMode {
    pub fn is_series(self) -> bool {
        !matches!(self, LossMode::IdealPulse)
    }

    /// Modes whose output stays inside `[0, 1]`, so `|L w| <= |w|` for every wave.
    pub fn is_bounded(self) -> bool {
        matches!(self, LossMode::IdealPulse | LossMode::FourierClamped)
    }

    pub fn name(self) -> &'static str {
        match self {
            LossMode::IdealPulse => "ideal",
            LossMode::FourierPaper => "fourier_paper",
            LossMode::FourierCorrected => "fourier_corrected",
            LossMode::FourierClamped => "fourier_clamped",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ideal" | "ideal_pulse" | "idealpulse" => Some(LossMode::IdealPulse),
            "fourier_paper" | "fourierpaper" | "paper" => Some(LossMode::FourierPaper),
            "fourier_corrected" | "fouriercorrected" | "corrected" => {
                Some(LossMode::FourierCorrected)
            }
            "fourier_clamped" | "fourierclamped" | "clamped" => Some(LossMode::FourierClamped),
            _ => None,
        }
    }
}

/// One harmonic of the series: `a_n cos(n w0 t) + b_n sin(n w0 t)`.
///
/// For the corrected convention at `n = 0`, `a` carries the mean value of the
/// pulse and `b` is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierPair {
    pub n: u32,
    pub a: f64,
    pub b: f64,
}

/// A validated periodic loss model.
///
/// Coefficients for the configured mode are computed once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossProfile {
    period: f64,
    alpha: f64,
    harmonics: u32,
    mode: LossMode,
    phase: f64,
    dc: f64,
    terms: Vec<FourierPair>,
}

impl LossProfile {
    pub fn new(period: f64, alpha: f64, harmonics: u32, mode: LossMode) -> Result<Self, LossError> {
        Self::with_phase(period, alpha, harmonics, mode, 0.0)
    }

    pub fn with_phase(
        period: f64,
        alpha: f64,
        harmonics: u32,
        mode: LossMode,
        phase: f64,
    ) -> Result<Self, LossError> {
        if !(period.is_finite() && period > 0.0) {
            return Err(LossError::InvalidPeriod(period));
        }
        if !(alpha.is_finite() && alpha >= 0.0 && alpha < period) {
            return Err(LossError::InvalidWidth { alpha, period });
        }
        if harmonics == 0 {
            return Err(LossError::NoHarmonics);
        }
        if !phase.is_finite() {
            return Err(LossError::InvalidPhase(phase));
        }
        let mut profile = LossProfile {
            period,
            alpha,
            harmonics,
            mode,
            phase,
            dc: 0.0,
            terms: Vec::new(),
        };
        profile.rebuild_terms();
        Ok(profile)
    }

    /// A channel that never drops anything.
    pub fn lossless() -> Self {
        Self::new(1.0, 0.0, 1, LossMode::IdealPulse).expect("valid constant profile")
    }

    /// Build from a loss rate `alpha / period` instead of a width.
    pub fn from_rate(period: f64, rate: f64, harmonics: u32, mode: LossMode) -> Result<Self, LossError> {
        Self::new(period, rate * period, harmonics, mode)
    }

    fn rebuild_terms(&mut self) {
        let n_max = self.harmonics;
        match self.mode {
            LossMode::IdealPulse => {
                self.dc = 0.0;
                self.terms.clear();
            }
            LossMode::FourierPaper => {
                self.dc = 0.0;
                self.terms = (1..=n_max).map(|n| paper_pair(n, self.period, self.alpha)).collect();
            }
            LossMode::FourierCorrected | LossMode::FourierClamped => {
                self.dc = 1.0 - self.alpha / self.period;
                self.terms = (1..=n_max).map(|n| corrected_pair(n, self.period, self.alpha)).collect();
            }
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rate(&self) -> f64 {
        self.alpha / self.period
    }

    pub fn harmonics(&self) -> u32 {
        self.harmonics
    }

    pub fn mode(&self) -> LossMode {
        self.mode
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn fundamental(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn with_mode(&self, mode: LossMode) -> Self {
        let mut p = self.clone();
        p.mode = mode;
        p.rebuild_terms();
        p
    }

    pub fn with_harmonics(&self, harmonics: u32) -> Result<Self, LossError> {
        if harmonics == 0 {
            return Err(LossError::NoHarmonics);
        }
        let mut p = self.clone();
        p.harmonics = harmonics;
        p.rebuild_terms();
        Ok(p)
    }

    /// Time since the start of the current period's loss window, in `[0, T)`.
    fn local_time(&self, t: f64) -> f64 {
        let tau = (t - self.phase).rem_euclid(self.period);
        // rem_euclid can round up to exactly `period` for tiny negative inputs
        if tau >= self.period {
            0.0
        } else {
            tau
        }
    }

    /// Evaluate `L(t)` in the profile's own mode.
    pub fn eval(&self, t: f64) -> f64 {
        match self.mode {
            LossMode::IdealPulse => self.eval_ideal(t),
            _ => self.series_value(t),
        }
    }

    pub fn eval_ideal(&self, t: f64) -> f64 {
        if self.local_time(t) < self.alpha {
            0.0
        } else {
            1.0
        }
    }

    pub fn eval_series(&self, t: f64) -> Result<f64, LossError> {
        if !self.mode.is_series() {
            return Err(LossError::NotASeries(self.mode));
        }
        Ok(self.series_value(t))
    }

    fn raw_series(&self, t: f64) -> f64 {
        let w = self.fundamental() * self.local_time(t);
        self.dc
            + self
                .terms
                .iter()
                .map(|p| {
                    let (s, c) = (p.n as f64 * w).sin_cos();
                    p.a * c + p.b * s
                })
                .sum::<f64>()
    }

    fn series_value(&self, t: f64) -> f64 {
        let v = self.raw_series(t);
        if self.mode == LossMode::FourierClamped {
            v.clamp(0.0, 1.0)
        } else {
            v
        }
    }

    fn clamp_active(&self, t: f64) -> bool {
        if self.mode != LossMode::FourierClamped {
            return false;
        }
        let v = self.raw_series(t);
        !(0.0..=1.0).contains(&v)
    }

    /// First time derivative of the truncated series (per second).
    ///
    /// In clamped mode the derivative is zero wherever the clip is active.
    pub fn eval_series_d1(&self, t: f64) -> Result<f64, LossError> {
        if !self.mode.is_series() {
            return Err(LossError::NotASeries(self.mode));
        }
        if self.clamp_active(t) {
            return Ok(0.0);
        }
        let w0 = self.fundamental();
        let w = w0 * self.local_time(t);
        Ok(self
            .terms
            .iter()
            .map(|p| {
                let k = p.n as f64 * w0;
                let (s, c) = (p.n as f64 * w).sin_cos();
                k * (p.b * c - p.a * s)
            })
            .sum())
    }

    /// Second time derivative of the truncated series (per second squared).
    pub fn eval_series_d2(&self, t: f64) -> Result<f64, LossError> {
        if !self.mode.is_series() {
            return Err(LossError::NotASeries(self.mode));
        }
        if self.clamp_active(t) {
            return Ok(0.0);
        }
        let w0 = self.fundamental();
        let w = w0 * self.local_time(t);
        Ok(self
            .terms
            .iter()
            .map(|p| {
                let k = p.n as f64 * w0;
                let (s, c) = (p.n as f64 * w).sin_cos();
                -k * k * (p.a * c + p.b * s)
            })
            .sum())
    }

    /// `L` and `dL/dt` for the profile's mode. The ideal pulse is piecewise
    /// constant, so its derivative is reported as zero away from the edges.
    pub fn eval_with_rate(&self, t: f64) -> (f64, f64) {
        match self.mode {
            LossMode::IdealPulse => (self.eval_ideal(t), 0.0),
            _ => (
                self.series_value(t),
                self.eval_series_d1(t).expect("series mode"),
            ),
        }
    }

    /// Upper bounds on `|dL/dt|` and `|d2L/dt2|` from the coefficient magnitudes.
    pub fn derivative_bounds(&self) -> (f64, f64) {
        let w0 = self.fundamental();
        self.terms.iter().fold((0.0, 0.0), |(d1, d2), p| {
            let k = p.n as f64 * w0;
            let m = p.a.abs() + p.b.abs();
            (d1 + k * m, d2 + k * k * m)
        })
    }

    pub fn terms(&self) -> &[FourierPair] {
        &self.terms
    }

    pub fn dc(&self) -> f64 {
        self.dc
    }

    /// Whether `t` is within `margin` seconds of a window edge.
    pub fn near_edge(&self, t: f64, margin: f64) -> bool {
        let tau = self.local_time(t);
        let d_start = tau.min(self.period - tau);
        let d_end = (tau - self.alpha).abs();
        d_start < margin || (self.alpha > 0.0 && d_end < margin)
    }
}

fn paper_pair(n: u32, period: f64, alpha: f64) -> FourierPair {
    let nf = n as f64;
    let x = 2.0 * PI * nf * alpha / period;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    FourierPair {
        n,
        a: -x.sin() / (PI * nf),
        b: (x.cos() - sign) / (PI * nf),
    }
}

fn corrected_pair(n: u32, period: f64, alpha: f64) -> FourierPair {
    let nf = n as f64;
    let x = 2.0 * PI * nf * alpha / period;
    FourierPair {
        n,
        a: -x.sin() / (PI * nf),
        b: (x.cos() - 1.0) / (PI * nf),
    }
}

/// Closed-form coefficients in the quoted convention. Rejects `n = 0`.
pub fn coefficients_paper(n: u32, profile: &LossProfile) -> Result<FourierPair, LossError> {
    if n == 0 {
        return Err(LossError::ZeroHarmonic);
    }
    Ok(paper_pair(n, profile.period, profile.alpha))
}

/// Coefficients of the pulse train with the loss window at `[0, alpha)`.
/// `n = 0` returns the mean value in `a`.
pub fn coefficients_corrected(n: u32, profile: &LossProfile) -> FourierPair {
    if n == 0 {
        return FourierPair {
            n: 0,
            a: 1.0 - profile.alpha / profile.period,
            b: 0.0,
        };
    }
    corrected_pair(n, profile.period, profile.alpha)
}

/// Panels per period used by the quadrature helpers below.
pub const QUADRATURE_PANELS: usize = 1 << 14;

/// Composite Simpson over `[a, b]` with `panels` (rounded up to even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = panels.max(2) + panels % 2;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let x = a + h * i as f64;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    acc * h / 3.0
}

/// RMS difference between the ideal pulse and a series with `harmonics` terms,
/// in the profile's series mode (`IdealPulse` profiles use the corrected series).
///
/// The integral is split at the window edges so both pieces are smooth.
pub fn l2_truncation_error(profile: &LossProfile, harmonics: u32) -> Result<f64, LossError> {
    if harmonics == 0 {
        return Err(LossError::NoHarmonics);
    }
    Ok(truncation_error_inner(profile, harmonics))
}

pub(crate) fn truncation_error_inner(profile: &LossProfile, harmonics: u32) -> f64 {
    let mode = if profile.mode.is_series() {
        profile.mode
    } else {
        LossMode::FourierCorrected
    };
    let mut series = profile.with_mode(mode);
    series.harmonics = harmonics;
    series.rebuild_terms();
    // evaluate in window-local time so the split points are exact
    let t0 = profile.phase;
    let err = |tau: f64, ideal: f64| {
        let d = ideal - series.series_value(t0 + tau);
        d * d
    };
    let period = profile.period;
    let alpha = profile.alpha;
    let panels_in = ((QUADRATURE_PANELS as f64) * alpha / period).ceil() as usize;
    let inside = simpson(|tau| err(tau, 0.0), 0.0, alpha, panels_in.max(2));
    let outside = simpson(|tau| err(tau, 1.0), alpha, period, QUADRATURE_PANELS);
    ((inside + outside) / period).sqrt()
}

/// Writes `t,L_ideal,L_series,d1,d2` over `[t_start, t_end)` at `rate` samples per second.
/// Derivative columns are empty for the ideal mode.
pub fn write_csv<W: Write>(
    profile: &LossProfile,
    t_start: f64,
    t_end: f64,
    rate: f64,
    out: &mut W,
) -> io::Result<()> {
    writeln!(out, "t,L_ideal,L_series,d1,d2")?;
    let samples = ((t_end - t_start) * rate).round().max(0.0) as usize;
    for i in 0..samples {
        let t = t_start + i as f64 / rate;
        let ideal = profile.eval_ideal(t);
        match profile.mode {
            LossMode::IdealPulse => writeln!(out, "{},{},{},,", fmt17(t), fmt17(ideal), fmt17(ideal))?,
            _ => writeln!(
                out,
                "{},{},{},{},{}",
                fmt17(t),
                fmt17(ideal),
                fmt17(profile.series_value(t)),
                fmt17(profile.eval_series_d1(t).expect("series")),
                fmt17(profile.eval_series_d2(t).expect("series")),
            )?,
        }
    }
    Ok(())
}

/// 17 significant digits; enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
