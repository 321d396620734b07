use num_complex::Complex;
use qheat_core::heat::{ExactEngine, ProtocolConfig, Schedule, DEFAULT_TERM_CAP};
use qheat_core::Error as CoreError;
use serde_json::json;

use super::simulate::sweep_values;
use super::{effective_spec, spec_metadata, RunOptions};
use crate::error::{CliError, CliResult};
use crate::spec::{LoadedSpec, SweepPoint};
use crate::table::{ResultTable, Section};

/// Exact enumeration: heat atoms, `G(u)` on the configured grid, moments by
/// both routes and a summary; or one row per sweep point.
pub fn exact(loaded: &LoadedSpec, opts: RunOptions) -> CliResult<ResultTable> {
    let spec = effective_spec(loaded, opts);
    let cap = spec.term_cap.map_or(DEFAULT_TERM_CAP, u128::from);
    let mut table = ResultTable::new(spec_metadata("exact", &spec, &loaded.sha256));
    table.metadata.insert("term_cap", json!(cap.to_string()));
    let jarzynski_u = Complex::new(0.0, spec.beta);

    if !spec.has_sweep() {
        let config = spec.protocol(SweepPoint::default())?;
        let engine = engine(&config, cap)?;
        let dist = engine.distribution();
        let mut atoms = Section::new("atoms", &["q", "probability"]);
        for atom in dist.atoms() {
            atoms.push(vec![atom.q, atom.prob]);
        }
        table.push(atoms);

        let u_points = spec.u_points()?;
        if !u_points.is_empty() {
            table.metadata.insert("u_axis", json!(spec.u_axis));
            let mut g = Section::new("characteristic", &["u", "g_re", "g_im"]);
            for (x, u) in u_points {
                let v = engine.characteristic(u);
                g.push(vec![x, v.re, v.im]);
            }
            table.push(g);
        }

        let mut moments = Section::new("moments", &["order", "direct", "finite_difference"]);
        for order in 1..=spec.max_moment {
            let m = engine.moment(order)?;
            moments.push(vec![order as f64, m.direct, m.finite_difference]);
        }
        table.push(moments);

        let mut summary = Section::new("summary", &["jarzynski", "unitality_residual", "term_count", "total_probability"]);
        summary.push(vec![
            engine.characteristic(jarzynski_u).re,
            engine.unitality_residual(),
            engine.term_count() as f64,
            dist.total_probability(),
        ]);
        table.push(summary);
        return Ok(table);
    }

    let sweep_cols = spec.sweep_columns();
    let columns: Vec<&str> = sweep_cols.iter().copied().chain(["jarzynski", "mean", "second_moment"]).collect();
    let mut section = Section::new("sweep", &columns);
    for point in spec.sweep_points()? {
        let config = spec.protocol(point)?;
        let engine = engine(&config, cap)?;
        let dist = engine.distribution();
        let mut row = sweep_values(&sweep_cols, point);
        row.extend([engine.characteristic(jarzynski_u).re, dist.moment(1), dist.moment(2)]);
        section.push(row);
    }
    table.push(section);
    Ok(table)
}

fn engine(config: &ProtocolConfig<f64>, cap: u128) -> CliResult<ExactEngine<'_, f64>> {
    ExactEngine::with_cap(config, cap).map_err(|e| match e {
        CoreError::EnumerationTooLarge { required, cap } => CliError::Enumeration(suggestion(config, required, cap)),
        other => other.into(),
    })
}

fn suggestion(config: &ProtocolConfig<f64>, required: u128, cap: u128) -> String {
    let mut msg = format!("exact enumeration needs {required} terms but the cap is {cap}; ");
    if let Schedule::Measurements(_) = config.schedule() {
        let k = config.basis().len() as u128;
        let model = config.model();
        let feasible = (1..=64usize)
            .take_while(|&m| {
                u32::try_from(m)
                    .ok()
                    .and_then(|e| k.checked_pow(e))
                    .and_then(|seqs| seqs.checked_mul(model.realization_count(m)))
                    .is_some_and(|terms| terms <= cap)
            })
            .last();
        if let Some(m) = feasible {
            msg.push_str(&format!("use at most {m} measurements, "));
        }
    }
    msg.push_str(&format!("set \"term_cap\" to at least {required}, or use `qheat simulate`"));
    msg
}
