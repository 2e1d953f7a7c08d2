//! Statistics over simulated series.
//!
//! Standard deviations are population standard deviations everywhere.
//! Statistics that are undefined on a given input return `NaN`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compensated (Neumaier) sum.
pub fn exact_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

pub fn log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::Domain(format!(
            "log returns need at least 2 prices, got {}",
            prices.len()
        )));
    }
    if let Some(p) = prices.iter().find(|p| !(**p > 0.0)) {
        return Err(Error::Domain(format!("non-positive price {p}")));
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// σ/P over trailing windows of `lag` prices. Entry `i` belongs to price
/// index `i + lag - 1`; empty when the series is shorter than `lag`.
pub fn rolling_volatility(prices: &[f64], lag: usize) -> Vec<f64> {
    if lag == 0 || lag > prices.len() {
        return Vec::new();
    }
    prices
        .windows(lag)
        .map(|w| population_std(w) / w[lag - 1])
        .collect()
}

/// Pearson correlation; NaN when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Correlation between the windows `[t-Δ, t)` and `[t-2Δ, t-Δ)` of a series
/// (the `Δ` values ending just before `t - Δ` and just before `t`).
pub fn interval_autocorr(series: &[f64], delta: usize, t: usize) -> Result<f64> {
    if delta == 0 || t < 2 * delta || t > series.len() {
        return Err(Error::Domain(format!(
            "interval autocorrelation needs 2Δ <= t <= len (Δ={delta}, t={t}, len={})",
            series.len()
        )));
    }
    Ok(pearson(&series[t - 2 * delta..t - delta], &series[t - delta..t]))
}

/// Lag-1 autocorrelation.
pub fn autocorr_lag1(series: &[f64]) -> f64 {
    if series.len() < 3 {
        return f64::NAN;
    }
    pearson(&series[..series.len() - 1], &series[1..])
}

/// Excess kurtosis (population moments); NaN with zero variance.
pub fn excess_kurtosis(values: &[f64]) -> f64 {
    let m = mean(values);
    let n = values.len() as f64;
    let m2 = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    if m2 == 0.0 {
        return f64::NAN;
    }
    m4 / (m2 * m2) - 3.0
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// Histogram of signed run lengths: `+k` for k consecutive rises, `-k` for
/// k consecutive drops. Unchanged days end a run and belong to none.
pub fn run_lengths(prices: &[f64]) -> BTreeMap<i64, u64> {
    let mut hist = BTreeMap::new();
    let mut current: i64 = 0;
    let close = |run: &mut i64, hist: &mut BTreeMap<i64, u64>| {
        if *run != 0 {
            *hist.entry(*run).or_insert(0) += 1;
            *run = 0;
        }
    };
    for w in prices.windows(2) {
        let dir = if w[1] > w[0] {
            1
        } else if w[1] < w[0] {
            -1
        } else {
            0
        };
        if dir == 0 || current.signum() != dir {
            close(&mut current, &mut hist);
        }
        current += dir;
    }
    close(&mut current, &mut hist);
    hist
}

/// Steps `t` with P(t)/P(t-1) <= 0.8.
pub fn crash_steps(prices: &[f64]) -> Vec<usize> {
    prices
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] <= 0.8 * w[0])
        .map(|(i, _)| i + 1)
        .collect()
}

pub fn count_crashes(prices: &[f64]) -> usize {
    crash_steps(prices).len()
}

/// Q/Q_tot in percent.
pub fn traded_ratio(quantity: u64, outstanding: u64) -> Result<f64> {
    if outstanding == 0 {
        return Err(Error::Domain("no shares outstanding".into()));
    }
    Ok(100.0 * quantity as f64 / outstanding as f64)
}

/// Relative change in price volatility around `t`: σ over P[t, t+τ] against
/// σ over P[t-τ, t]. NaN when the first window is flat.
pub fn volatility_impact(prices: &[f64], t: usize, tau: usize) -> Result<f64> {
    if tau == 0 || t < tau || t + tau >= prices.len() {
        return Err(Error::Domain(format!(
            "impact window [{}, {}] outside the series of length {}",
            t as i64 - tau as i64,
            t + tau,
            prices.len()
        )));
    }
    let pre = population_std(&prices[t - tau..=t]);
    let post = population_std(&prices[t..=t + tau]);
    if pre == 0.0 {
        return Ok(f64::NAN);
    }
    Ok((post - pre) / pre)
}

pub fn volume_bps(volumes: &[u64], outstanding: u64) -> Vec<f64> {
    volumes
        .iter()
        .map(|&v| 1e4 * v as f64 / outstanding as f64)
        .collect()
}

/// Mean of the finite values, NaN if there are none.
pub fn finite_mean(values: &[f64]) -> f64 {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    mean(&finite)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub grid_value: f64,
    /// Run index, or `None` for rows that pool several runs.
    pub run: Option<u64>,
    pub metric: String,
    pub value: f64,
}

/// Long-format table of statistics keyed by grid point and run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub rows: Vec<MetricRow>,
    /// (grid_value, k) -> count, summed over runs.
    pub run_lengths: BTreeMap<(i64, i64), u64>,
}

/// Grid values are stored as integers scaled by this factor for map keys.
const GRID_KEY_SCALE: f64 = 1e6;

fn grid_key(v: f64) -> i64 {
    (v * GRID_KEY_SCALE).round() as i64
}

pub const RESULTS_HEADER: [&str; 4] = ["grid_value", "run", "metric", "value"];
pub const RUNLENGTHS_HEADER: [&str; 3] = ["grid_value", "k", "count"];

impl MetricTable {
    pub fn push(&mut self, grid_value: f64, run: Option<u64>, metric: &str, value: f64) {
        self.rows.push(MetricRow { grid_value, run, metric: metric.to_string(), value });
    }

    pub fn add_run_lengths(&mut self, grid_value: f64, hist: &BTreeMap<i64, u64>) {
        for (&k, &count) in hist {
            *self.run_lengths.entry((grid_key(grid_value), k)).or_insert(0) += count;
        }
    }

    pub fn merge(&mut self, other: MetricTable) {
        self.rows.extend(other.rows);
        for (key, count) in other.run_lengths {
            *self.run_lengths.entry(key).or_insert(0) += count;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Values of one metric at one grid point, in row order.
    pub fn values(&self, grid_value: f64, metric: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| grid_key(r.grid_value) == grid_key(grid_value) && r.metric == metric)
            .map(|r| r.value)
            .collect()
    }

    /// Distinct grid values in first-seen order.
    pub fn grid_values(&self) -> Vec<f64> {
        let mut seen = Vec::new();
        for r in &self.rows {
            if !seen.iter().any(|&g| grid_key(g) == grid_key(r.grid_value)) {
                seen.push(r.grid_value);
            }
        }
        seen
    }

    pub fn write_results<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(RESULTS_HEADER)?;
        for r in &self.rows {
            let run = r.run.map_or_else(|| "pooled".to_string(), |i| i.to_string());
            w.write_record([format_value(r.grid_value), run, r.metric.clone(), format_value(r.value)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_run_lengths<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(RUNLENGTHS_HEADER)?;
        for (&(g, k), &count) in &self.run_lengths {
            w.write_record([
                format_value(g as f64 / GRID_KEY_SCALE),
                k.to_string(),
                count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest representation that round-trips; `NaN` spelled out.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn log_return_examples() {
        assert_eq!(log_returns(&[100.0, 100.0]).unwrap(), vec![0.0]);
        let r = log_returns(&[100.0, 110.0]).unwrap();
        assert!((r[0] - 0.095_310_179_804_324_93).abs() < 1e-15);
        assert!(log_returns(&[100.0]).is_err());
        assert!(log_returns(&[100.0, 0.0]).is_err());
    }

    #[test]
    fn rolling_volatility_examples() {
        assert!(rolling_volatility(&[5.0; 10], 3).iter().all(|&v| v == 0.0));
        let v = rolling_volatility(&[100.0, 100.0, 100.0, 200.0], 4);
        assert_eq!(v.len(), 1);
        assert!((v[0] - 0.216_506_350_946_109_66).abs() < 1e-15);
        let v = rolling_volatility(&[100.0, 102.0], 2);
        assert!((v[0] - 0.009_803_921_568_627_45).abs() < 1e-15);
        assert!(rolling_volatility(&[1.0, 2.0], 3).is_empty());
    }

    #[test]
    fn interval_autocorr_examples() {
        let periodic: Vec<f64> = (0..12).map(|i| [1.0, 3.0, 2.0][i % 3]).collect();
        assert!((interval_autocorr(&periodic, 3, 9).unwrap() - 1.0).abs() < 1e-12);
        let anti = [1.0, -1.0, 2.0, -1.0, 1.0, -2.0];
        assert!((interval_autocorr(&anti, 3, 6).unwrap() + 1.0).abs() < 1e-12);
        assert!(interval_autocorr(&[1.0, 1.0, 1.0, 2.0, 3.0, 4.0], 3, 6).unwrap().is_nan());
        assert!(interval_autocorr(&periodic, 3, 5).is_err());
    }

    #[test]
    fn run_length_examples() {
        assert_eq!(run_lengths(&[1.0, 2.0, 3.0, 2.0, 1.0]), BTreeMap::from([(-2, 1), (2, 1)]));
        assert_eq!(run_lengths(&[1.0, 2.0, 3.0, 4.0]), BTreeMap::from([(3, 1)]));
        assert!(run_lengths(&[1.0, 1.0, 1.0]).is_empty());
        assert_eq!(run_lengths(&[1.0, 2.0, 2.0, 3.0]), BTreeMap::from([(1, 2)]));
    }

    #[test]
    fn crash_examples() {
        assert_eq!(count_crashes(&[100.0, 80.0]), 1);
        assert_eq!(count_crashes(&[100.0, 81.0]), 0);
        assert_eq!(count_crashes(&[100.0, 79.0, 63.0]), 2);
        assert_eq!(crash_steps(&[100.0, 79.0, 63.0]), vec![1, 2]);
    }

    #[test]
    fn traded_ratio_examples() {
        assert_eq!(traded_ratio(0, 1000).unwrap(), 0.0);
        assert_eq!(traded_ratio(50, 1000).unwrap(), 5.0);
        assert_eq!(traded_ratio(150, 1000).unwrap(), 15.0);
        assert!(traded_ratio(1, 0).is_err());
    }

    #[test]
    fn volatility_impact_examples() {
        // symmetric windows around t=2
        let same = [1.0, 2.0, 3.0, 2.0, 1.0];
        assert_eq!(volatility_impact(&same, 2, 2).unwrap(), 0.0);
        let double = [2.0, 3.0, 4.0, 6.0, 8.0];
        assert!((volatility_impact(&double, 2, 2).unwrap() - 1.0).abs() < 1e-12);
        assert!(volatility_impact(&[5.0, 5.0, 5.0, 6.0, 7.0], 2, 2).unwrap().is_nan());
        assert!(volatility_impact(&same, 1, 2).is_err());
        assert!(volatility_impact(&same, 3, 2).is_err());
    }

    #[test]
    fn volume_bps_examples() {
        assert_eq!(volume_bps(&[1000, 0, 10], 1000), vec![1e4, 0.0, 100.0]);
    }

    #[test]
    fn spearman_and_kurtosis() {
        assert!((spearman(&[0.0, 1.0, 2.0, 3.0], &[1.0, 5.0, 6.0, 100.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[0.0, 1.0, 2.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!(spearman(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]).is_nan());
        assert_eq!(ranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
        // two-point distribution has excess kurtosis -2
        assert!((excess_kurtosis(&[1.0, -1.0, 1.0, -1.0]) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum() {
        let values = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(exact_sum(values), 2.0);
    }

    #[test]
    fn table_csv() {
        let mut t = MetricTable::default();
        t.push(0.5, Some(1), "mean_volume", 3.25);
        t.push(0.5, None, "impact", f64::NAN);
        t.add_run_lengths(0.5, &BTreeMap::from([(-1, 2), (3, 1)]));
        t.add_run_lengths(0.5, &BTreeMap::from([(-1, 1)]));
        let mut out = Vec::new();
        t.write_results(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "grid_value,run,metric,value\n0.5,1,mean_volume,3.25\n0.5,pooled,impact,NaN\n"
        );
        let mut out = Vec::new();
        t.write_run_lengths(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "grid_value,k,count\n0.5,-1,3\n0.5,3,1\n");
        assert_eq!(t.values(0.5, "mean_volume"), vec![3.25]);
    }

    fn prices() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1.0f64..1000.0, 2..60)
    }

    proptest! {
        #[test]
        fn log_returns_scale_free(p in prices(), c in 0.01f64..100.0) {
            let scaled: Vec<f64> = p.iter().map(|x| x * c).collect();
            let a = log_returns(&p).unwrap();
            let b = log_returns(&scaled).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn volatility_scale_free(p in prices(), c in 0.01f64..100.0, lag in 2usize..10) {
            let scaled: Vec<f64> = p.iter().map(|x| x * c).collect();
            let a = rolling_volatility(&p, lag);
            let b = rolling_volatility(&scaled, lag);
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn run_lengths_bounded(p in prop::collection::vec(0u8..5, 2..80)) {
            let p: Vec<f64> = p.into_iter().map(f64::from).collect();
            let covered: u64 = run_lengths(&p).iter().map(|(k, c)| k.unsigned_abs() * c).sum();
            prop_assert!(covered <= p.len() as u64 - 1);
        }

        #[test]
        fn autocorr_in_range(s in prop::collection::vec(-10.0f64..10.0, 20..40), delta in 1usize..10) {
            let r = interval_autocorr(&s, delta, 2 * delta).unwrap();
            prop_assert!(r.is_nan() || (-1.0..=1.0).contains(&r));
        }
    }
}
