//! Hourly workload forecasting.
//!
//! The pipeline cleans the series (simultaneous usage/quota spikes and
//! one-off peaks), focuses on data after the latest level shift, detects a
//! period from the periodogram, and blends a trend-plus-seasonal fit with a
//! per-phase historical average. A guard falls back to replaying the latest
//! period when the blend clearly under-predicts a recent burst.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HOUR_SECS: i64 = 3600;

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("series are misaligned: usage starts at {usage_start} with {usage_len} points, quota at {quota_start} with {quota_len}")]
    Misaligned { usage_start: i64, usage_len: usize, quota_start: i64, quota_len: usize },
    #[error("line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("series is empty")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Values on a one-hour grid starting at `start` (unix seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub start: i64,
    pub values: Vec<f64>,
}

impl MetricSeries {
    pub fn new(start: i64, values: Vec<f64>) -> Self {
        MetricSeries { start, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Parses `timestamp,value` rows; a non-numeric first row is a header.
    /// Timestamps must advance by exactly one hour.
    pub fn read_csv(reader: impl Read) -> Result<Self, ForecastError> {
        let mut rdr =
            csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
        let mut start = None;
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| ForecastError::Csv {
                line: e.position().map_or(0, |p| p.line() as usize),
                msg: e.to_string(),
            })?;
            let lineno = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != 2 {
                return Err(ForecastError::Csv { line: lineno, msg: "expected two columns".into() });
            }
            let (ts, v) = (&rec[0], &rec[1]);
            let Ok(ts) = ts.parse::<i64>() else {
                if start.is_none() {
                    continue;
                }
                return Err(ForecastError::Csv { line: lineno, msg: format!("bad timestamp {ts:?}") });
            };
            let v: f64 = v.parse().map_err(|_| ForecastError::Csv { line: lineno, msg: format!("bad value {v:?}") })?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ForecastError::Csv {
                    line: lineno,
                    msg: format!("value must be finite and >= 0, got {v}"),
                });
            }
            let s = *start.get_or_insert(ts);
            let expected = s + values.len() as i64 * HOUR_SECS;
            if ts != expected {
                return Err(ForecastError::Csv {
                    line: lineno,
                    msg: format!("timestamp {ts} is off the hourly grid (expected {expected})"),
                });
            }
            values.push(v);
        }
        let start = start.ok_or(ForecastError::Empty)?;
        Ok(MetricSeries { start, values })
    }

    pub fn write_csv(&self, w: impl Write) -> Result<(), ForecastError> {
        let mut wtr = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| ForecastError::Csv { line: 0, msg: e.to_string() };
        wtr.write_record(["timestamp", "value"]).map_err(csv_err)?;
        for (i, v) in self.values.iter().enumerate() {
            let ts = self.start + i as i64 * HOUR_SECS;
            wtr.write_record([ts.to_string(), v.to_string()]).map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecastConfig {
    pub horizon: usize,
    /// Multiple of the rolling median that marks a spike.
    pub spike_factor: f64,
    pub median_window: usize,
    /// Multiple of the rolling median that marks a usage peak.
    pub peak_factor: f64,
    /// Hours searched on each side of a peak for a recurrence.
    pub recurrence_window: usize,
    pub remove_sporadic_peaks: bool,
    pub changepoint_window: usize,
    pub changepoint_effect: f64,
    pub psd_ratio: f64,
    /// Minimum autocorrelation at the detected lag.
    pub acf_min: f64,
    pub guard_margin: f64,
    /// Trailing hours used to score each component.
    pub weight_window: usize,
    pub min_history: usize,
    pub use_seasonal_trend: bool,
    pub use_historical_average: bool,
    pub burst_guard: bool,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            horizon: 168,
            spike_factor: 5.0,
            median_window: 24,
            peak_factor: 2.0,
            recurrence_window: 240,
            remove_sporadic_peaks: true,
            changepoint_window: 72,
            changepoint_effect: 0.25,
            psd_ratio: 4.0,
            acf_min: 0.3,
            guard_margin: 0.3,
            weight_window: 72,
            min_history: 14 * 24,
            use_seasonal_trend: true,
            use_historical_average: true,
            burst_guard: true,
        }
    }
}

fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Median of the `window` points before each index (fewer at the start;
/// the first point uses itself).
pub fn trailing_median(xs: &[f64], window: usize) -> Vec<f64> {
    (0..xs.len())
        .map(|i| {
            if i == 0 {
                xs[0]
            } else {
                let mut w = xs[i.saturating_sub(window)..i].to_vec();
                median(&mut w)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DenoiseReport {
    /// Indices replaced because usage and quota spiked together.
    pub simultaneous: Vec<usize>,
    /// Indices replaced as one-off peaks.
    pub sporadic: Vec<usize>,
}

/// Replaces simultaneous usage/quota spikes and, when enabled, one-off usage
/// peaks with the trailing median.
pub fn denoise(
    usage: &MetricSeries,
    quota: Option<&MetricSeries>,
    cfg: &ForecastConfig,
) -> Result<(MetricSeries, DenoiseReport), ForecastError> {
    let mut out = usage.values.clone();
    let mut report = DenoiseReport::default();
    let med_u = trailing_median(&usage.values, cfg.median_window);
    if let Some(q) = quota {
        if q.start != usage.start || q.len() != usage.len() {
            return Err(ForecastError::Misaligned {
                usage_start: usage.start,
                usage_len: usage.len(),
                quota_start: q.start,
                quota_len: q.len(),
            });
        }
        let med_q = trailing_median(&q.values, cfg.median_window);
        for i in 1..out.len() {
            let u_spike = usage.values[i] > cfg.spike_factor * med_u[i];
            let q_spike = q.values[i] > cfg.spike_factor * med_q[i];
            if u_spike && q_spike {
                out[i] = med_u[i];
                report.simultaneous.push(i);
            }
        }
    }
    if cfg.remove_sporadic_peaks {
        report.sporadic = sporadic_peaks(&out, cfg);
        let med = trailing_median(&out, cfg.median_window);
        for &i in &report.sporadic {
            out[i] = med[i];
        }
    }
    Ok((MetricSeries::new(usage.start, out), report))
}

/// Indices of peaks with no similar peak within the recurrence window on
/// either side. Only peaks followed by a full window of data are judged.
pub fn sporadic_peaks(xs: &[f64], cfg: &ForecastConfig) -> Vec<usize> {
    let med = trailing_median(xs, cfg.median_window);
    // Contiguous runs of peak points form one event: (start, end, height).
    let mut events: Vec<(usize, usize, f64)> = Vec::new();
    for i in 1..xs.len() {
        if med[i] > 0.0 && xs[i] > cfg.peak_factor * med[i] {
            match events.last_mut() {
                Some((_, end, h)) if *end + 1 == i => {
                    *end = i;
                    *h = h.max(xs[i]);
                }
                _ => events.push((i, i, xs[i])),
            }
        }
    }
    let w = cfg.recurrence_window;
    let mut out = Vec::new();
    for (k, &(s, e, h)) in events.iter().enumerate() {
        if e + w >= xs.len() {
            continue;
        }
        let recurs = events
            .iter()
            .enumerate()
            .any(|(j, &(s2, _, h2))| j != k && s2.abs_diff(s) <= w && h2 >= 0.5 * h && h2 <= 2.0 * h);
        if !recurs {
            out.extend(s..=e);
        }
    }
    out
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Least-squares line over `xs` indexed `0..n`: (intercept, slope).
pub fn linear_fit(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return (mean(xs), 0.0);
    }
    let tm = (n - 1.0) / 2.0;
    let ym = mean(xs);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in xs.iter().enumerate() {
        let dt = t as f64 - tm;
        sxy += dt * (y - ym);
        sxx += dt * dt;
    }
    let b = sxy / sxx;
    (ym - b * tm, b)
}

fn sse_linear(xs: &[f64]) -> f64 {
    let (a, b) = linear_fit(xs);
    xs.iter().enumerate().map(|(t, y)| (y - a - b * t as f64).powi(2)).sum()
}

fn sse_step(xs: &[f64], split: usize) -> f64 {
    let (l, r) = xs.split_at(split);
    let (ml, mr) = (mean(l), mean(r));
    l.iter().map(|y| (y - ml).powi(2)).sum::<f64>() + r.iter().map(|y| (y - mr).powi(2)).sum::<f64>()
}

/// Most recent level shift: the strongest point of the last run of indices
/// whose trailing and leading window means differ by the effect size, kept
/// only if a step explains the neighbourhood better than a line.
pub fn detect_changepoint(xs: &[f64], cfg: &ForecastConfig) -> Option<usize> {
    let w = cfg.changepoint_window;
    if xs.len() < 7 * 24 || xs.len() < 2 * w {
        return None;
    }
    let mut prefix = vec![0.0; xs.len() + 1];
    for (i, x) in xs.iter().enumerate() {
        prefix[i + 1] = prefix[i] + x;
    }
    let window_mean = |a: usize, b: usize| (prefix[b] - prefix[a]) / (b - a) as f64;
    let mut last_run: Vec<(usize, f64)> = Vec::new();
    let mut prev: Option<usize> = None;
    for t in w..=xs.len() - w {
        let l = window_mean(t - w, t);
        let r = window_mean(t, t + w);
        let base = l.abs().max(r.abs());
        let effect = if base > 0.0 { (r - l).abs() / base } else { 0.0 };
        if effect >= cfg.changepoint_effect {
            if prev != Some(t - 1) {
                last_run.clear();
            }
            last_run.push((t, (r - l).abs()));
            prev = Some(t);
        }
    }
    let (tau, _) = last_run.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))?;
    let local = &xs[tau - w..tau + w];
    (sse_step(local, w) < sse_linear(local)).then_some(tau)
}

/// Periodogram power at integer period `p`.
pub fn power_at(xs: &[f64], p: usize) -> f64 {
    let f = 2.0 * std::f64::consts::PI / p as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (t, x) in xs.iter().enumerate() {
        let a = f * t as f64;
        re += x * a.cos();
        im -= x * a.sin();
    }
    (re * re + im * im) / xs.len() as f64
}

/// Sample autocorrelation at `lag`.
pub fn acf(xs: &[f64], lag: usize) -> f64 {
    if lag >= xs.len() {
        return 0.0;
    }
    let m = mean(xs);
    let var: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = (0..xs.len() - lag).map(|t| (xs[t] - m) * (xs[t + lag] - m)).sum();
    cov / var
}

fn detrend(xs: &[f64]) -> Vec<f64> {
    let (a, b) = linear_fit(xs);
    xs.iter().enumerate().map(|(t, y)| y - a - b * t as f64).collect()
}

/// Dominant period in hours, if significant.
pub fn detect_period(xs: &[f64], cfg: &ForecastConfig) -> Option<usize> {
    let max_p = xs.len() / 3;
    if max_p < 2 {
        return None;
    }
    let d = detrend(xs);
    let powers: Vec<(usize, f64)> = (2..=max_p).map(|p| (p, power_at(&d, p))).collect();
    let (best, peak) = powers.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))?;
    let energy: f64 = d.iter().map(|x| x * x).sum();
    if peak <= 1e-12 * energy.max(1e-300) {
        return None;
    }
    let mut ps: Vec<f64> = powers.iter().map(|x| x.1).collect();
    let med = median(&mut ps);
    if peak < cfg.psd_ratio * med {
        return None;
    }
    (acf(&d, best) >= cfg.acf_min).then_some(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentWeights {
    pub seasonal_trend: f64,
    pub historical_average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub horizon: usize,
    pub forecast: Vec<f64>,
    pub u_max: f64,
    pub detected_period: Option<usize>,
    pub changepoint: Option<usize>,
    pub weights: ComponentWeights,
    pub burst_guard_applied: bool,
    /// Too little history for the full model; historical average only.
    pub fallback: bool,
    pub cleaned: DenoiseReport,
}

/// Trend plus phase-mean seasonal profile, evaluated at absolute index `t`.
struct SeasonalTrend {
    a: f64,
    b: f64,
    origin: usize,
    season: Vec<f64>,
}

impl SeasonalTrend {
    fn fit(xs: &[f64], origin: usize, period: Option<usize>) -> Self {
        let (a, b) = linear_fit(xs);
        let season = match period {
            Some(p) => {
                let mut sums = vec![0.0; p];
                let mut counts = vec![0usize; p];
                for (i, y) in xs.iter().enumerate() {
                    let ph = (origin + i) % p;
                    sums[ph] += y - a - b * i as f64;
                    counts[ph] += 1;
                }
                sums.iter().zip(&counts).map(|(s, c)| if *c > 0 { s / *c as f64 } else { 0.0 }).collect()
            }
            None => Vec::new(),
        };
        SeasonalTrend { a, b, origin, season }
    }

    fn at(&self, t: usize) -> f64 {
        let i = t as f64 - self.origin as f64;
        let s = if self.season.is_empty() { 0.0 } else { self.season[t % self.season.len()] };
        self.a + self.b * i + s
    }
}

/// Mean of the values one and two periods before `t` that exist in `xs`.
fn historical_at(xs: &[f64], t: usize, period: usize) -> Option<f64> {
    let n = xs.len();
    // Project `t` back into the observed range by whole periods.
    let mut base = t;
    while base >= n {
        base -= period;
    }
    let mut vals = Vec::with_capacity(2);
    let mut u = base;
    if t >= n {
        // `base` itself is observed; it belongs to the last period.
        vals.push(xs[u]);
        if u >= period {
            vals.push(xs[u - period]);
        }
    } else {
        for _ in 0..2 {
            if u < period {
                break;
            }
            u -= period;
            vals.push(xs[u]);
        }
    }
    (!vals.is_empty()).then(|| mean(&vals))
}

fn mae(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for (a, b) in pairs {
        s += (a - b).abs();
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Forecasts `cfg.horizon` hours past the end of `usage`.
pub fn forecast(
    usage: &MetricSeries,
    quota: Option<&MetricSeries>,
    cfg: &ForecastConfig,
) -> Result<ForecastResult, ForecastError> {
    if usage.is_empty() {
        return Err(ForecastError::Empty);
    }
    let (clean, report) = denoise(usage, quota, cfg)?;
    let xs = &clean.values;
    let n = xs.len();
    let fallback = n < cfg.min_history;
    let changepoint = if fallback { None } else { detect_changepoint(xs, cfg) };
    let fit_from = changepoint.filter(|c| n - c >= cfg.weight_window).unwrap_or(0);
    let detected_period = detect_period(&xs[fit_from..], cfg);
    let period = detected_period.unwrap_or(24).min(n);

    let use_st = cfg.use_seasonal_trend && !fallback;
    let use_ha = cfg.use_historical_average || fallback || !use_st;
    let st = SeasonalTrend::fit(&xs[fit_from..], fit_from, detected_period);
    let ha_at = |t: usize| historical_at(xs, t, period).unwrap_or(xs[n - 1]);

    let weights = match (use_st, use_ha) {
        (true, false) => ComponentWeights { seasonal_trend: 1.0, historical_average: 0.0 },
        (false, _) => ComponentWeights { seasonal_trend: 0.0, historical_average: 1.0 },
        (true, true) => {
            let from = n.saturating_sub(cfg.weight_window).max(fit_from);
            let e_st = mae((from..n).map(|t| (st.at(t), xs[t])));
            let e_ha = mae((from..n).map(|t| (ha_at(t), xs[t])));
            match (e_st == 0.0, e_ha == 0.0) {
                (true, true) => ComponentWeights { seasonal_trend: 0.5, historical_average: 0.5 },
                (true, false) => ComponentWeights { seasonal_trend: 1.0, historical_average: 0.0 },
                (false, true) => ComponentWeights { seasonal_trend: 0.0, historical_average: 1.0 },
                (false, false) => {
                    let (ws, wh) = (1.0 / e_st, 1.0 / e_ha);
                    ComponentWeights { seasonal_trend: ws / (ws + wh), historical_average: wh / (ws + wh) }
                }
            }
        }
    };

    let mut out: Vec<f64> = (n..n + cfg.horizon)
        .map(|t| {
            let mut v = 0.0;
            if weights.seasonal_trend > 0.0 {
                v += weights.seasonal_trend * st.at(t);
            }
            if weights.historical_average > 0.0 {
                v += weights.historical_average * ha_at(t);
            }
            v.max(0.0)
        })
        .collect();

    let mut guard = false;
    if cfg.burst_guard {
        let recent = &xs[n - period..];
        let recent_max = recent.iter().copied().fold(0.0, f64::max);
        let fmax = out.iter().copied().fold(0.0, f64::max);
        if fmax < (1.0 - cfg.guard_margin) * recent_max {
            out = (0..cfg.horizon).map(|i| recent[i % period]).collect();
            guard = true;
        }
    }
    let u_max = out.iter().copied().fold(0.0, f64::max);
    Ok(ForecastResult {
        horizon: cfg.horizon,
        forecast: out,
        u_max,
        detected_period,
        changepoint,
        weights,
        burst_guard_applied: guard,
        fallback,
        cleaned: report,
    })
}

/// Seeded diurnal usage generator with linear growth and multiplicative
/// Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSeries {
    pub hours: usize,
    pub base: f64,
    pub amplitude: f64,
    #[serde(default = "default_period")]
    pub period_hours: f64,
    #[serde(default)]
    pub growth_per_hour: f64,
    /// Standard deviation of the noise as a fraction of the clean value.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_period() -> f64 {
    24.0
}

impl SyntheticSeries {
    /// Noise-free value at hour `t`, clamped at zero.
    pub fn clean_at(&self, t: usize) -> f64 {
        let t = t as f64;
        let phase = 2.0 * std::f64::consts::PI * t / self.period_hours;
        (self.base + self.growth_per_hour * t + self.amplitude * phase.sin()).max(0.0)
    }

    /// Values for hours `from..to`; noise draws depend only on the seed and
    /// the hour, so overlapping ranges agree.
    pub fn range(&self, from: usize, to: usize) -> Vec<f64> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        (from..to)
            .map(|t| {
                let clean = self.clean_at(t);
                if self.noise == 0.0 {
                    return clean;
                }
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(crate::hash::hash_u64(self.seed, t as u64));
                let z: f64 = StandardNormal.sample(&mut rng);
                (clean * (1.0 + self.noise * z)).max(0.0)
            })
            .collect()
    }

    pub fn generate(&self) -> MetricSeries {
        MetricSeries::new(0, self.range(0, self.hours))
    }
}

/// Mean absolute percentage error of `pred` against `actual` (non-zero actuals).
pub fn mape(pred: &[f64], actual: &[f64]) -> f64 {
    let pairs: Vec<f64> =
        pred.iter().zip(actual).filter(|(_, a)| **a != 0.0).map(|(p, a)| ((p - a) / a).abs()).collect();
    mean(&pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    fn cfg() -> ForecastConfig {
        ForecastConfig::default()
    }

    fn series(values: Vec<f64>) -> MetricSeries {
        MetricSeries::new(0, values)
    }

    fn sine(n: usize, period: f64, noise: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nd = Normal::new(0.0, 1.0).unwrap();
        (0..n)
            .map(|t| 100.0 + 10.0 * (2.0 * PI * t as f64 / period).sin() + noise * 100.0 * nd.sample(&mut rng))
            .collect()
    }

    #[test]
    fn simultaneous_spike_replaced() {
        let mut u = vec![100.0; 200];
        let mut q = vec![1000.0; 200];
        u[150] = 1000.0;
        q[150] = 10_000.0;
        let c = ForecastConfig { remove_sporadic_peaks: false, ..cfg() };
        let (out, rep) = denoise(&series(u), Some(&series(q)), &c).unwrap();
        assert_eq!(rep.simultaneous, vec![150]);
        assert_eq!(out.values[150], 100.0);
    }

    #[test]
    fn usage_only_spike_retained() {
        // The spike is recent: fewer than ten days follow it.
        let mut u = vec![100.0; 400];
        u[350] = 1000.0;
        let q = vec![1000.0; 400];
        let (out, rep) = denoise(&series(u), Some(&series(q)), &cfg()).unwrap();
        assert!(rep.simultaneous.is_empty() && rep.sporadic.is_empty());
        assert_eq!(out.values[350], 1000.0);
    }

    #[test]
    fn old_one_off_peak_removed() {
        let mut u = vec![100.0; 600];
        u[100] = 1000.0;
        let (out, rep) = denoise(&series(u), None, &cfg()).unwrap();
        assert_eq!(rep.sporadic, vec![100]);
        assert_eq!(out.values[100], 100.0);
    }

    #[test]
    fn recurring_peaks_retained() {
        let mut u = vec![100.0; 600];
        u[100] = 800.0;
        u[124] = 800.0;
        let (out, rep) = denoise(&series(u), None, &cfg()).unwrap();
        assert!(rep.sporadic.is_empty());
        assert_eq!((out.values[100], out.values[124]), (800.0, 800.0));
    }

    #[test]
    fn misaligned_rejected() {
        let r = denoise(&series(vec![1.0; 10]), Some(&series(vec![1.0; 9])), &cfg());
        assert!(matches!(r, Err(ForecastError::Misaligned { .. })));
    }

    #[test]
    fn step_changepoint_found() {
        let xs: Vec<f64> = (0..720).map(|t| if t < 15 * 24 { 100.0 } else { 200.0 }).collect();
        let cp = detect_changepoint(&xs, &cfg()).unwrap();
        assert!(cp.abs_diff(15 * 24) <= 24, "cp {cp}");
    }

    #[test]
    fn stationary_and_ramp_have_no_changepoint() {
        assert_eq!(detect_changepoint(&[50.0; 720], &cfg()), None);
        let ramp: Vec<f64> = (0..720).map(|t| 10.0 + t as f64).collect();
        assert_eq!(detect_changepoint(&ramp, &cfg()), None);
    }

    #[test]
    fn periods_detected() {
        assert_eq!(detect_period(&sine(720, 24.0, 0.05, 1), &cfg()), Some(24));
        let square: Vec<f64> = (0..720).map(|t| if (t % 84) < 42 { 150.0 } else { 50.0 }).collect();
        assert_eq!(detect_period(&square, &cfg()), Some(84));
    }

    #[test]
    fn white_noise_has_no_period() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..720).map(|_| 100.0 + rng.random::<f64>() * 20.0).collect();
            assert_eq!(detect_period(&xs, &cfg()), None, "seed {seed}");
        }
    }

    #[test]
    fn sine_forecast_accurate() {
        let all = sine(720 + 168, 24.0, 0.0, 0);
        let r = forecast(&series(all[..720].to_vec()), None, &cfg()).unwrap();
        assert_eq!(r.detected_period, Some(24));
        assert!(mape(&r.forecast, &all[720..]) <= 0.02);
    }

    #[test]
    fn constant_forecast_is_constant() {
        let r = forecast(&series(vec![42.0; 720]), None, &cfg()).unwrap();
        assert!(r.forecast.iter().all(|v| (v - 42.0).abs() < 1e-9));
        assert!((r.u_max - 42.0).abs() < 1e-9);
        assert!((r.weights.seasonal_trend + r.weights.historical_average - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_hour_bursts_trigger_guard() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut xs = vec![100.0; 720];
        for day in 0..30 {
            xs[day * 24 + rng.random_range(0..24)] = 500.0;
        }
        let r = forecast(&series(xs), None, &cfg()).unwrap();
        assert!(r.burst_guard_applied);
        assert!(r.u_max >= 450.0);
    }

    #[test]
    fn short_history_falls_back() {
        let r = forecast(&series(sine(200, 24.0, 0.0, 0)), None, &cfg()).unwrap();
        assert!(r.fallback);
        assert_eq!(r.weights.historical_average, 1.0);
    }

    #[test]
    fn single_component_matches_itself() {
        let xs = sine(720, 24.0, 0.05, 4);
        let only_ha = ForecastConfig { use_seasonal_trend: false, burst_guard: false, ..cfg() };
        let r = forecast(&series(xs.clone()), None, &only_ha).unwrap();
        let n = xs.len();
        for (i, v) in r.forecast.iter().enumerate() {
            let t = n + i;
            let expected = historical_at(&xs, t, 24).unwrap().max(0.0);
            assert_eq!(*v, expected);
        }
    }

    #[test]
    fn guard_never_lowers_peak() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..500)
                .map(|t| {
                    50.0 + 40.0 * ((t % 24) as f64 / 24.0)
                        + rng.random::<f64>() * 300.0 * f64::from(u8::from(rng.random::<f64>() < 0.02))
                })
                .collect();
            let on = forecast(&series(xs.clone()), None, &cfg()).unwrap();
            let off = forecast(&series(xs), None, &ForecastConfig { burst_guard: false, ..cfg() }).unwrap();
            assert!(on.u_max >= off.u_max);
            assert!(on.forecast.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let s = MetricSeries::new(7200, vec![1.0, 2.5, 3.0]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(MetricSeries::read_csv(&buf[..]).unwrap(), s);
        let bad = b"timestamp,value\n0,1\n7200,2\n";
        assert!(matches!(MetricSeries::read_csv(&bad[..]), Err(ForecastError::Csv { line: 3, .. })));
    }

    #[test]
    fn growth_series_forecasts() {
        let gen = SyntheticSeries {
            hours: 720,
            base: 400.0,
            amplitude: 100.0,
            period_hours: 24.0,
            growth_per_hour: 0.5,
            noise: 0.0,
            seed: 3,
        };
        let r = forecast(&gen.generate(), None, &cfg()).unwrap();
        let truth = gen.range(720, 888);
        assert!(mape(&r.forecast, &truth) <= 0.10);
        let noisy = SyntheticSeries { noise: 0.05, ..gen };
        let r = forecast(&noisy.generate(), None, &cfg()).unwrap();
        assert!(mape(&r.forecast, &noisy.range(720, 888)) <= 0.20);
        assert_eq!(noisy.range(700, 720), noisy.generate().values[700..]);
    }

    #[test]
    fn deterministic() {
        let xs = sine(720, 24.0, 0.05, 9);
        let a = forecast(&series(xs.clone()), None, &cfg()).unwrap();
        let b = forecast(&series(xs), None, &cfg()).unwrap();
        assert_eq!(a, b);
    }
}
