use marketsim::book::on_tick;
use marketsim::config::ExperimentSettings;
use marketsim::experiments::{ExperimentSpec, FrequencyExperiment, Registry, TickSizeExperiment};
use marketsim::sim::{init_agents, RunState};
use marketsim::rng::run_key;
use marketsim::{run_simulation, SimConfig};

fn small() -> SimConfig {
    SimConfig { num_agents: 20, horizon_steps: 200, learning_steps: 60, master_seed: 11, ..SimConfig::default() }
}

fn spec(settings: ExperimentSettings) -> ExperimentSpec {
    ExperimentSpec { base: small(), settings, jobs: Some(2) }
}

#[test]
fn integer_prices_without_decimals() {
    let cfg = SimConfig { tick_digits: 0, ..small() };
    let mut state = RunState::new(&cfg, 0).unwrap();
    let mut trades = 0;
    while !state.is_finished() {
        let update = state.step().unwrap();
        for tx in &update.transactions {
            assert_eq!(tx.price, tx.price.round(), "{tx:?}");
            trades += 1;
        }
        assert!(state.last_orders().iter().all(|o| on_tick(o.limit_price, 0)));
    }
    assert!(trades > 0);
}

#[test]
fn zero_hft_share_is_the_base_model() {
    let base = run_simulation(&small(), 3).unwrap();
    let p0 = run_simulation(&SimConfig { hft_fraction: 0.0, ..small() }, 3).unwrap();
    assert_eq!(base, p0);
}

#[test]
fn full_hft_share_shortens_every_horizon() {
    let cfg = SimConfig { hft_fraction: 1.0, ..small() };
    let agents = init_agents(&cfg, run_key(cfg.master_seed, 0)).unwrap();
    assert!(agents.iter().all(|a| a.params.is_hft && a.params.horizon <= 2 * cfg.week_length - 1));
}

#[test]
fn grid_points_are_independent() {
    let tick = Registry::with_builtins();
    let tick = tick.get("tick").unwrap();
    let both = tick
        .run(&spec(ExperimentSettings { runs_per_point: 2, tick_grid: vec![0, 2], ..Default::default() }))
        .unwrap();
    let alone = tick
        .run(&spec(ExperimentSettings { runs_per_point: 2, tick_grid: vec![2], ..Default::default() }))
        .unwrap();
    let rows_at = |t: &marketsim::metrics::MetricTable| {
        // Debug formatting so that undefined (NaN) statistics compare equal
        t.rows.iter().filter(|r| r.grid_value == 2.0).map(|r| format!("{r:?}")).collect::<Vec<_>>()
    };
    assert!(!rows_at(&alone.table).is_empty());
    assert_eq!(rows_at(&both.table), rows_at(&alone.table));
    assert_eq!(TickSizeExperiment::points(&spec(Default::default())).len(), 6);
    assert_eq!(FrequencyExperiment::points(&spec(Default::default())).len(), 6);
}

#[test]
fn parallelism_does_not_change_results() {
    let settings = ExperimentSettings { runs_per_point: 3, frequency_grid: vec![0.0, 1.0], ..Default::default() };
    let registry = Registry::with_builtins();
    let freq = registry.get("frequency").unwrap();
    let one = freq.run(&ExperimentSpec { jobs: Some(1), ..spec(settings.clone()) }).unwrap();
    let four = freq.run(&ExperimentSpec { jobs: Some(4), ..spec(settings) }).unwrap();
    assert_eq!(one.table, four.table);
}

#[test]
fn metaorder_table_matches_run_logs() {
    let settings = ExperimentSettings { metaorder_runs: 2, ..Default::default() };
    let s = ExperimentSpec { base: SimConfig { horizon_steps: 600, ..small() }, ..spec(settings) };
    let out = Registry::with_builtins().get("metaorder").unwrap().run(&s).unwrap();
    assert_eq!(out.events.len(), 2 * 3);
    for run in 0..2 {
        let cfg = SimConfig { metaorders_enabled: true, ..s.base.clone() };
        let result = run_simulation(&cfg, run).unwrap();
        let logged: Vec<_> = out.events.iter().filter(|e| e.run == run).map(|e| e.event.clone()).collect();
        assert_eq!(logged, result.metaorder_events);
        for e in &result.metaorder_events {
            assert!((e.nav_after - e.nav_before).abs() < 1e-6);
            assert!(e.realized_ratio <= e.target_ratio + 1e-12 + 1.0 / result.shares_outstanding as f64);
        }
    }
    let counts: f64 = ["0_5", "5_10", "10_15"]
        .iter()
        .map(|b| out.table.values(5.0, &format!("count_impact_target_{b}"))[0])
        .sum();
    assert!(counts <= 6.0);
}

#[test]
fn reporting_starts_from_initial_nav() {
    let cfg = small();
    let result = run_simulation(&cfg, 1).unwrap();
    let initial = cfg.initial_cash + cfg.initial_shares as f64 * result.prices[0];
    assert!(result.agent_navs.iter().all(|navs| (navs[0] - initial).abs() < 1e-9));
    assert!(result.bankruptcies.iter().filter(|b| b.reported).all(|b| b.step >= cfg.learning_steps));
}
