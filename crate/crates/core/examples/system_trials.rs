//! Runs both scripted scenarios with calibrated noise and prints the
//! metrics report for each.

use adaptive_hri::bench::{compute_metrics, run_trials, Scenario};
use adaptive_hri::config::RunConfig;

fn main() {
    let cfg = RunConfig::calibrated();
    for scenario in [Scenario::ReplaceCup, Scenario::BreakfastStop] {
        let logs = run_trials(scenario, 150, cfg.seed, &cfg);
        println!("{}", compute_metrics(&logs).render());
    }
}
