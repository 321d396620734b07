use std::f64::consts::PI;
use std::path::Path;

use clap::ValueEnum;
use num_complex::Complex;
use qheat_core::disorder::{DiscreteWaitingDist, WaitingTimeModel};
use qheat_core::heat::simulate as run_mc;
use qheat_core::tls::{self, TlsParams};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::RunOptions;
use crate::error::{CliError, CliResult};
use crate::spec::{linspace, sha256_hex, GridSpec};
use crate::table::{Metadata, ResultTable, Section};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureId {
    /// `G(i beta)` against `c1` for a fixed waiting time, with Monte Carlo points.
    Fig1,
    /// As fig1 for annealed waiting times, plus the `c1` slope against `|a|^2`.
    Fig2,
    /// `Delta lambda` against `<tau>` for several total times.
    Fig3,
    /// Maximum annealed mean heat against `Delta E <tau>` for several `p1`.
    Fig4,
    /// Quenched `c1` slope against `|a|^2` for growing `M`, with its limit.
    Fig5,
}

/// Optional replacements for the built-in figure parameters. Each figure
/// reads only the fields it uses.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureOverrides {
    pub seed: Option<u64>,
    /// Half splitting; eigenvalues are `-e` and `e`.
    pub e: Option<f64>,
    pub beta: Option<f64>,
    pub m_count: Option<usize>,
    pub m_values: Option<Vec<usize>>,
    pub a_values: Option<Vec<f64>>,
    /// `|a|` grid; `|a|^2` is its square.
    pub a_grid: Option<GridSpec>,
    pub a2: Option<f64>,
    pub a2_grid: Option<GridSpec>,
    pub c1_grid: Option<GridSpec>,
    pub mc_c1_grid: Option<GridSpec>,
    pub tau_bar: Option<f64>,
    pub taus: Option<[f64; 2]>,
    pub p1: Option<f64>,
    pub p1_values: Option<Vec<f64>>,
    pub total_time: Option<f64>,
    pub total_times: Option<Vec<f64>>,
    pub mean_tau_grid: Option<GridSpec>,
    /// `Delta E <tau>` grid.
    pub x_grid: Option<GridSpec>,
    pub trajectories: Option<u64>,
}

/// Reads overrides from `path`, returning them with the file's SHA-256.
pub fn load_overrides(path: &Path) -> CliResult<(FigureOverrides, String)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let o = serde_json::from_slice(&bytes).map_err(|e| {
        CliError::config(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column()))
    })?;
    Ok((o, sha256_hex(&bytes)))
}

fn grid(g: &Option<GridSpec>, default: Vec<f64>, name: &str) -> CliResult<Vec<f64>> {
    match g {
        Some(g) => g.points(name),
        None => Ok(default),
    }
}

fn at<T>(r: qheat_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::at("figure", e))
}

pub fn figure(which: FigureId, o: &FigureOverrides, sha256: &str, opts: RunOptions) -> CliResult<ResultTable> {
    let seed = opts.seed.or(o.seed).unwrap_or(0);
    let mut meta = Metadata::new("figure", seed, sha256);
    meta.insert("figure", json!(which));
    let (sections, params) = match which {
        FigureId::Fig1 | FigureId::Fig2 => c1_lines(which, o, seed, opts.threads)?,
        FigureId::Fig3 => delta_lambda(o)?,
        FigureId::Fig4 => resonance(o)?,
        FigureId::Fig5 => slope_convergence(o)?,
    };
    for key in ["m_count", "model"] {
        if let Some(v) = params.get(key) {
            meta.insert(key, v.clone());
        }
    }
    meta.insert("params", params);
    let mut table = ResultTable::new(meta);
    for s in sections {
        table.push(s);
    }
    Ok(table)
}

fn c1_lines(which: FigureId, o: &FigureOverrides, seed: u64, threads: usize) -> CliResult<(Vec<Section>, Value)> {
    let e = o.e.unwrap_or(1.0);
    let beta = o.beta.unwrap_or(1.0);
    let m = o.m_count.unwrap_or(5);
    let a_values = o.a_values.clone().unwrap_or_else(|| vec![0.0, 0.1, 0.5]);
    let c1s = grid(&o.c1_grid, linspace(0.0, 1.0, 101), "c1_grid")?;
    let mc_c1s = grid(&o.mc_c1_grid, linspace(0.0, 1.0, 11), "mc_c1_grid")?;
    let n_traj = o.trajectories.unwrap_or(1000);
    let [t1, t2] = o.taus.unwrap_or([0.01, 3.0]);
    let p1 = o.p1.unwrap_or(0.3);
    let dist = at(DiscreteWaitingDist::bimodal(t1, t2, p1))?;
    let model = match which {
        FigureId::Fig1 => at(WaitingTimeModel::fixed(o.tau_bar.unwrap_or(1.0)))?,
        _ => WaitingTimeModel::Annealed { dist: dist.clone() },
    };
    let u = Complex::new(0.0, beta);

    let mut analytic = Section::new("analytic", &["a", "a2", "c1", "g"]);
    let mut mc = Section::new("monte_carlo", &["a", "a2", "c1", "g", "stderr", "n_samples"]);
    for &a in &a_values {
        let base = at(TlsParams::new(e, a * a, 0.0, m, beta))?;
        for &c1 in &c1s {
            let p = at(base.with_c1(c1))?;
            analytic.push(vec![a, a * a, c1, at(tls::g_model(&p, u, &model))?.re]);
        }
        for &c1 in &mc_c1s {
            let config = at(at(base.with_c1(c1))?.protocol_config(model.clone(), seed))?;
            let tally = run_mc(&config, n_traj, threads)?;
            let j = tally.jarzynski(beta);
            mc.push(vec![a, a * a, c1, j.estimate, j.std_error, tally.n_samples() as f64]);
        }
    }
    let mut params = json!({
        "e": e, "beta": beta, "m_count": m, "model": model.label(), "a_values": a_values,
        "trajectories": n_traj, "thermal_c1": tls::thermal_c1(e, beta),
    });
    match &model {
        WaitingTimeModel::Fixed { tau_bar } => params["tau_bar"] = json!(tau_bar),
        _ => {
            params["taus"] = json!([t1, t2]);
            params["p1"] = json!(p1);
        }
    }
    let mut sections = vec![analytic, mc];

    if which == FigureId::Fig2 {
        let tau_bar = o.tau_bar.unwrap_or_else(|| dist.mean());
        let a_grid = grid(&o.a_grid, linspace(0.0, 1.0, 21), "a_grid")?;
        let models = [
            at(WaitingTimeModel::fixed(tau_bar))?,
            WaitingTimeModel::Quenched { dist: dist.clone() },
            WaitingTimeModel::Annealed { dist },
        ];
        let mut inset = Section::new("inset", &["a", "a2", "slope_fixed", "slope_quenched", "slope_annealed"]);
        for &a in &a_grid {
            let p = at(TlsParams::new(e, a * a, 0.0, m, beta))?;
            let mut row = vec![a, a * a];
            for model in &models {
                row.push(at(tls::c1_slope(&p, u, model))?.re);
            }
            inset.push(row);
        }
        params["inset_tau_bar"] = json!(tau_bar);
        sections.push(inset);
    }
    Ok((sections, params))
}

fn delta_lambda(o: &FigureOverrides) -> CliResult<(Vec<Section>, Value)> {
    let e = o.e.unwrap_or(0.5);
    let a2 = o.a2.unwrap_or(0.2);
    let [t1, t2] = o.taus.unwrap_or([0.1, 1.5]);
    let totals = o.total_times.clone().unwrap_or_else(|| vec![1.5, 2.0, 2.5, 5.0, 10.0, 15.0, 20.0, 50.0]);
    let means = grid(&o.mean_tau_grid, linspace(t1, t2, 141), "mean_tau_grid")?;
    let support = at(DiscreteWaitingDist::bimodal(t1, t2, 0.5))?;
    let p = at(TlsParams::new(e, a2, 0.0, 1, 1.0))?;
    let mut s = Section::new("delta_lambda", &["total_time", "mean_tau", "m_count", "p1", "delta_lambda"]);
    for &total in &totals {
        for &mean in &means {
            let matched = at(tls::matched_bimodal(&support, mean))?;
            let dl = at(tls::delta_lambda(&p, &support, mean, total))?;
            let m = tls::measurement_count(total, mean);
            s.push(vec![total, mean, m as f64, matched.probs()[0], dl]);
        }
    }
    let params = json!({"e": e, "a2": a2, "taus": [t1, t2], "total_times": totals, "model": "annealed"});
    Ok((vec![s], params))
}

fn resonance(o: &FigureOverrides) -> CliResult<(Vec<Section>, Value)> {
    let e = o.e.unwrap_or(0.5);
    let a2 = o.a2.unwrap_or(0.2);
    let [t1, t2] = o.taus.unwrap_or([0.1, 0.5]);
    let total = o.total_time.unwrap_or(5.0);
    let p1s = o.p1_values.clone().unwrap_or_else(|| vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    let xs = grid(&o.x_grid, linspace(0.01, 4.0 * PI, 400), "x_grid")?;
    let p = at(TlsParams::new(e, a2, 0.0, 1, 1.0))?;
    let mut s = Section::new("max_mean_heat", &["p1", "x", "mean_tau", "m_count", "max_mean_heat"]);
    for &p1 in &p1s {
        let dist = at(DiscreteWaitingDist::bimodal(t1, t2, p1))?;
        for &x in &xs {
            let mean = x / (2.0 * e);
            let q = at(tls::max_mean_heat_annealed(&p, &dist, x, total))?;
            s.push(vec![p1, x, mean, tls::measurement_count(total, mean) as f64, q]);
        }
    }
    let params = json!({"e": e, "a2": a2, "taus": [t1, t2], "total_time": total, "p1_values": p1s, "model": "annealed"});
    Ok((vec![s], params))
}

fn slope_convergence(o: &FigureOverrides) -> CliResult<(Vec<Section>, Value)> {
    let e = o.e.unwrap_or(1.0);
    let beta = o.beta.unwrap_or(1.0);
    let [t1, t2] = o.taus.unwrap_or([0.01, 3.0]);
    let p1 = o.p1.unwrap_or(0.3);
    let ms = o.m_values.clone().unwrap_or_else(|| vec![2, 10, 100]);
    let a2s = grid(&o.a2_grid, linspace(0.0, 0.5, 51), "a2_grid")?;
    let model = WaitingTimeModel::Quenched { dist: at(DiscreteWaitingDist::bimodal(t1, t2, p1))? };
    let u = Complex::new(0.0, beta);
    let mut slope = Section::new("slope", &["m_count", "a2", "slope"]);
    for &m in &ms {
        for &a2 in &a2s {
            let p = at(TlsParams::new(e, a2, 0.0, m, beta))?;
            slope.push(vec![m as f64, a2, at(tls::c1_slope(&p, u, &model))?.re]);
        }
    }
    let mut limit = Section::new("asymptote", &["a2", "slope"]);
    for &a2 in &a2s {
        let p = at(TlsParams::new(e, a2, 0.0, 1, beta))?;
        let s = tls::g_infinity(&at(p.with_c1(1.0))?, u) - tls::g_infinity(&p, u);
        limit.push(vec![a2, s.re]);
    }
    let params = json!({"e": e, "beta": beta, "taus": [t1, t2], "p1": p1, "m_values": ms, "model": "quenched"});
    Ok((vec![slope, limit], params))
}
