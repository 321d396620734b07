use qheat_core::heat::{simulate as run_mc, HeatTally};
use serde_json::json;

use super::{effective_spec, spec_metadata, RunOptions};
use crate::error::CliResult;
use crate::spec::{LoadedSpec, SweepPoint};
use crate::table::{ResultTable, Section};

const SUMMARY_COLUMNS: [&str; 5] = ["n_samples", "jarzynski", "jarzynski_stderr", "mean", "second_moment"];

/// Monte Carlo run: per-atom histogram and summary, or one summary row per
/// sweep point. All points share the configured seed.
pub fn simulate(loaded: &LoadedSpec, opts: RunOptions) -> CliResult<ResultTable> {
    let spec = effective_spec(loaded, opts);
    let mut table = ResultTable::new(spec_metadata("simulate", &spec, &loaded.sha256));
    table.metadata.insert("trajectories", json!(spec.trajectories));

    if !spec.has_sweep() {
        let config = spec.protocol(SweepPoint::default())?;
        let tally = run_mc(&config, spec.trajectories, opts.threads)?;
        let n = tally.n_samples() as f64;
        let mut histogram = Section::new("histogram", &["q", "count", "probability"]);
        for atom in tally.distribution().atoms() {
            histogram.push(vec![atom.q, (atom.prob * n).round(), atom.prob]);
        }
        table.push(histogram);
        let mut summary = Section::new("summary", &SUMMARY_COLUMNS);
        summary.push(summary_row(&tally, spec.beta));
        table.push(summary);
        return Ok(table);
    }

    let sweep_cols = spec.sweep_columns();
    let columns: Vec<&str> = sweep_cols.iter().copied().chain(SUMMARY_COLUMNS).collect();
    let mut section = Section::new("sweep", &columns);
    for point in spec.sweep_points()? {
        let config = spec.protocol(point)?;
        let tally = run_mc(&config, spec.trajectories, opts.threads)?;
        let mut row = sweep_values(&sweep_cols, point);
        row.extend(summary_row(&tally, spec.beta));
        section.push(row);
    }
    table.push(section);
    Ok(table)
}

fn summary_row(tally: &HeatTally<f64>, beta: f64) -> Vec<f64> {
    let jar = tally.jarzynski(beta);
    let dist = tally.distribution();
    vec![tally.n_samples() as f64, jar.estimate, jar.std_error, dist.moment(1), dist.moment(2)]
}

pub(super) fn sweep_values(columns: &[&str], point: SweepPoint) -> Vec<f64> {
    columns
        .iter()
        .map(|&c| match c {
            "a2" => point.a2,
            "mean_tau" => point.mean_tau,
            _ => point.c1,
        })
        .map(|v| v.expect("swept column has a value"))
        .collect()
}
