use super::{run_grid, EventRecord, Experiment, ExperimentOutput, ExperimentSpec};
use crate::book::Side;
use crate::config::SimConfig;
use crate::error::Result;
use crate::metrics::{self, MetricTable};

/// Traded-ratio buckets in percent; the last one includes its upper edge.
pub const RHO_BUCKETS: [(f64, f64); 3] = [(0.0, 5.0), (5.0, 10.0), (10.0, 15.0)];

/// Which ratio places an event in a bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImpactBasis {
    /// Filled shares over shares outstanding.
    Realized,
    /// Ordered shares over shares outstanding.
    Target,
}

impl ImpactBasis {
    fn prefix(self) -> &'static str {
        match self {
            ImpactBasis::Realized => "impact",
            ImpactBasis::Target => "impact_target",
        }
    }

    fn ratio_percent(self, record: &EventRecord) -> f64 {
        100.0
            * match self {
                ImpactBasis::Realized => record.event.realized_ratio,
                ImpactBasis::Target => record.event.target_ratio,
            }
    }
}

/// `"0_5"` for the [0, 5%) bucket.
pub fn bucket_label(bucket: usize) -> String {
    let (lo, hi) = RHO_BUCKETS[bucket];
    format!("{lo}_{hi}")
}

fn bucket_of(percent: f64) -> Option<usize> {
    let last = RHO_BUCKETS.len() - 1;
    RHO_BUCKETS.iter().position(|&(lo, hi)| percent >= lo && percent < hi).or_else(|| {
        (percent == RHO_BUCKETS[last].1).then_some(last)
    })
}

/// Pooled rows, one per (τ, bucket): `<prefix>_<bucket>` with the mean I^P
/// over both sides, `_buy`/`_sell` per side, and `count_<prefix>_<bucket>`
/// with the number of events that had a defined I^P. `grid_value` is τ.
pub fn impact_rows(table: &mut MetricTable, records: &[EventRecord], taus: &[usize], basis: ImpactBasis) {
    if records.is_empty() {
        return;
    }
    let prefix = basis.prefix();
    for (ti, &tau) in taus.iter().enumerate() {
        for b in 0..RHO_BUCKETS.len() {
            let in_bucket: Vec<&EventRecord> = records
                .iter()
                .filter(|r| bucket_of(basis.ratio_percent(r)) == Some(b))
                .collect();
            let values = |side: Option<Side>| -> Vec<f64> {
                in_bucket
                    .iter()
                    .filter(|r| side.is_none_or(|s| r.event.side == s))
                    .map(|r| r.impacts[ti].1)
                    .filter(|v| v.is_finite())
                    .collect()
            };
            let label = bucket_label(b);
            let t = tau as f64;
            let all = values(None);
            table.push(t, None, &format!("{prefix}_{label}"), metrics::mean(&all));
            table.push(t, None, &format!("{prefix}_{label}_buy"), metrics::mean(&values(Some(Side::Bid))));
            table.push(t, None, &format!("{prefix}_{label}_sell"), metrics::mean(&values(Some(Side::Ask))));
            table.push(t, None, &format!("count_{prefix}_{label}"), all.len() as f64);
        }
    }
}

/// Injects one large order per trading year and measures the change in
/// price volatility around it.
pub struct MetaorderExperiment;

impl MetaorderExperiment {
    pub fn config(spec: &ExperimentSpec) -> SimConfig {
        SimConfig { metaorders_enabled: true, ..spec.base.clone() }
    }
}

impl Experiment for MetaorderExperiment {
    fn name(&self) -> &'static str {
        "metaorder"
    }

    fn description(&self) -> &'static str {
        "volatility impact of one large order per trading year"
    }

    fn run(&self, spec: &ExperimentSpec) -> Result<ExperimentOutput> {
        let taus = spec.settings.impact_taus.clone();
        let points = [(0.0, Self::config(spec))];
        let per_run = run_grid(&points, spec.settings.metaorder_runs, spec.jobs, |_, run, result| {
            Ok(result
                .metaorder_events
                .iter()
                .map(|event| EventRecord {
                    run,
                    event: event.clone(),
                    impacts: taus
                        .iter()
                        .map(|&tau| {
                            let ip = metrics::volatility_impact(&result.prices, event.step, tau)
                                .unwrap_or(f64::NAN);
                            (tau, ip)
                        })
                        .collect(),
                })
                .collect::<Vec<_>>())
        })?;
        let events: Vec<EventRecord> = per_run.into_iter().flatten().collect();
        let flagged = events.iter().filter(|e| e.impacts.iter().any(|(_, v)| v.is_nan())).count();
        if flagged > 0 {
            log::warn!("{flagged} metaorder events have an undefined impact for some interval");
        }
        let mut table = MetricTable::default();
        impact_rows(&mut table, &events, &taus, ImpactBasis::Realized);
        impact_rows(&mut table, &events, &taus, ImpactBasis::Target);
        Ok(ExperimentOutput { table, events })
    }
}
