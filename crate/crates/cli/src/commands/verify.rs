use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex;
use qheat_core::disorder::{trajectory_rng, DiscreteWaitingDist, TrajectoryRng, WaitingTimeModel};
use qheat_core::heat::{simulate as run_mc, ExactEngine, ProtocolConfig, Schedule, DEFAULT_TERM_CAP};
use qheat_core::quantum::{spectral_decompose, DensityMatrix, HermitianOperator, MeasurementBasis};
use qheat_core::tls::{self, TlsParams};
use qheat_core::Error as CoreError;
use rand::Rng;
use serde_json::json;

use super::{effective_spec, simulate, RunOptions};
use crate::error::CliResult;
use crate::spec::{self, linspace, LoadedSpec, SweepPoint};
use crate::table::Metadata;

type C = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Relation {
    AtMost,
    Above,
    Equal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub value: f64,
    /// Human-readable requirement on `value`, e.g. `<= 1e-10`.
    pub requirement: String,
    pub detail: String,
}

impl Check {
    fn new(name: &str, value: f64, relation: Relation, bound: f64, detail: impl Into<String>) -> Self {
        let (ok, sign) = match relation {
            Relation::AtMost => (value <= bound, "<="),
            Relation::Above => (value > bound, ">"),
            Relation::Equal => (value == bound, "=="),
        };
        Self {
            name: name.to_string(),
            status: if ok { Status::Pass } else { Status::Fail },
            value,
            requirement: format!("{sign} {bound:e}"),
            detail: detail.into(),
        }
    }

    fn skipped(name: &str, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), status: Status::Skip, value: f64::NAN, requirement: String::new(), detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub metadata: Metadata,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail).collect()
    }

    /// One `key=value` line per check, then a summary line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (key, value) in self.metadata_lines() {
            writeln!(out, "# {key}: {value}").expect("writing to a String");
        }
        for c in &self.checks {
            writeln!(
                out,
                "check={} status={} value={:e} requirement=\"{}\" detail=\"{}\"",
                c.name,
                c.status.label(),
                c.value,
                c.requirement,
                c.detail
            )
            .expect("writing to a String");
        }
        let count = |s: Status| self.checks.iter().filter(|c| c.status == s).count();
        writeln!(
            out,
            "summary passed={} failed={} skipped={}",
            count(Status::Pass),
            count(Status::Fail),
            count(Status::Skip)
        )
        .expect("writing to a String");
        out
    }

    fn metadata_lines(&self) -> Vec<(String, String)> {
        ["command", "version", "seed", "config_sha256"]
            .iter()
            .filter_map(|k| {
                self.metadata.get(k).map(|v| (k.to_string(), v.as_str().map_or_else(|| v.to_string(), str::to_string)))
            })
            .collect()
    }
}

/// Runs every check; the configured protocol, if given, is checked as well.
/// Random configurations derive from the effective seed.
pub fn verify(loaded: Option<&LoadedSpec>, opts: RunOptions) -> CliResult<VerifyReport> {
    let seed = opts.seed.or(loaded.map(|l| l.spec.seed)).unwrap_or(0);
    let sha = loaded.map_or("none", |l| l.sha256.as_str());
    let mut checks = Vec::new();
    if let Some(loaded) = loaded {
        checks.extend(config_checks(loaded, opts)?);
    }
    let threads = opts.threads;
    checks.extend(jarzynski(seed, threads)?);
    checks.push(unitality(seed)?);
    checks.extend(triple_agreement(seed, threads)?);
    checks.extend(affine_lines()?);
    checks.extend(mean_heat_structure()?);
    checks.extend(slope_limit()?);
    checks.push(small_tau()?);
    checks.extend(resonance()?);
    checks.push(moments(seed)?);
    checks.push(determinism(seed, threads)?);
    Ok(VerifyReport { metadata: Metadata::new("verify", seed, sha), checks })
}

fn config_checks(loaded: &LoadedSpec, opts: RunOptions) -> CliResult<Vec<Check>> {
    let spec = effective_spec(loaded, opts);
    let config = spec.protocol(SweepPoint::default())?;
    let mut checks = vec![Check::new("config.valid", 0.0, Relation::Equal, 0.0, "configuration parsed and validated")];
    let cap = spec.term_cap.map_or(DEFAULT_TERM_CAP, u128::from);
    let engine = match ExactEngine::with_cap(&config, cap) {
        Ok(engine) => engine,
        Err(e @ CoreError::EnumerationTooLarge { .. }) => {
            for name in ["config.unitality", "config.fourier", "config.moments", "config.jarzynski"] {
                checks.push(Check::skipped(name, e.to_string()));
            }
            return Ok(checks);
        }
        Err(e) => return Err(e.into()),
    };
    checks.push(Check::new("config.unitality", engine.unitality_residual(), Relation::AtMost, 1e-10, "Frobenius residual"));
    let dist = engine.distribution();
    let mut u_points: Vec<C> = spec.u_points()?.into_iter().map(|(_, u)| u).collect();
    if u_points.is_empty() {
        u_points = linspace(-3.0, 3.0, 13).into_iter().map(|x| C::new(x, 0.0)).collect();
    }
    let fourier = u_points.iter().map(|&u| (engine.characteristic(u) - dist.characteristic(u)).norm()).fold(0.0, f64::max);
    checks.push(Check::new("config.fourier", fourier, Relation::AtMost, 1e-10, "G(u) against the transform of P(q)"));
    let mut worst = 0.0f64;
    for order in 1..=4 {
        worst = worst.max(moment_error(&engine, order)?);
    }
    checks.push(Check::new("config.moments", worst, Relation::AtMost, 1e-6, "orders 1-4, relative to max(1, |moment|)"));
    let thermal = config.clone().with_rho0(DensityMatrix::thermal(config.h(), config.beta()))?;
    let g = ExactEngine::with_cap(&thermal, cap)?.characteristic(C::new(0.0, config.beta()));
    checks.push(Check::new("config.jarzynski", (g - 1.0).norm(), Relation::AtMost, 1e-10, "thermal initial state"));
    Ok(checks)
}

fn moment_error(engine: &ExactEngine<'_, f64>, order: u32) -> CliResult<f64> {
    let (direct, fd) = match engine.moment(order) {
        Ok(m) => (m.direct, m.finite_difference),
        Err(CoreError::MomentMismatch { direct, finite_difference, .. }) => (direct, finite_difference),
        Err(e) => return Err(e.into()),
    };
    Ok((direct - fd).abs() / direct.abs().max(1.0))
}

fn rng(seed: u64, check: u64, index: u64) -> TrajectoryRng {
    trajectory_rng(seed, (check << 32) | index)
}

fn random_dist(rng: &mut TrajectoryRng, lo: f64, hi: f64) -> CliResult<DiscreteWaitingDist<f64>> {
    let n = rng.random_range(2..=3);
    let values: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    Ok(DiscreteWaitingDist::new(values, weights.iter().map(|w| w / total).collect())?)
}

fn random_model(rng: &mut TrajectoryRng, kind: usize) -> CliResult<WaitingTimeModel<f64>> {
    Ok(match kind % 3 {
        0 => WaitingTimeModel::fixed(rng.random_range(0.01..3.0))?,
        1 => WaitingTimeModel::Quenched { dist: random_dist(rng, 0.01, 3.0)? },
        _ => WaitingTimeModel::Annealed { dist: random_dist(rng, 0.01, 3.0)? },
    })
}

fn random_complex(rng: &mut TrajectoryRng, d: usize) -> DMatrix<C> {
    DMatrix::from_fn(d, d, |_, _| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn random_general(rng: &mut TrajectoryRng, d: usize, m: usize, kind: usize) -> CliResult<ProtocolConfig<f64>> {
    let a = random_complex(rng, d);
    let h: HermitianOperator<f64> = spectral_decompose(&((&a + a.adjoint()) * C::new(0.5, 0.0)))?;
    let basis = MeasurementBasis::from_vectors(random_complex(rng, d).qr().q(), (0..d).map(|k| k as f64).collect())?;
    let weights: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let rho0 = DensityMatrix::diagonal_in(&h, &weights.iter().map(|w| w / total).collect::<Vec<_>>())?;
    let model = random_model(rng, kind)?;
    Ok(ProtocolConfig::new(h, basis, rho0, Schedule::Measurements(m), model, 1.0, 0)?)
}

fn jarzynski(seed: u64, threads: usize) -> CliResult<Vec<Check>> {
    const CONFIGS: usize = 120;
    const TRAJECTORIES: u64 = 10_000;
    let (mut exact_err, mut z_max) = (0.0f64, 0.0f64);
    for i in 0..CONFIGS {
        let mut r = rng(seed, 1, i as u64);
        let p = TlsParams::thermal(r.random_range(0.2..2.0), r.random_range(0.0..=1.0), r.random_range(1..=8), r.random_range(0.1..2.0))?;
        let config = p.protocol_config(random_model(&mut r, i)?, seed.wrapping_add(i as u64))?;
        let g = ExactEngine::new(&config)?.characteristic(C::new(0.0, p.beta));
        exact_err = exact_err.max((g - 1.0).norm());
        let j = run_mc(&config, TRAJECTORIES, threads)?.jarzynski(p.beta);
        z_max = z_max.max(z_score(j.estimate - 1.0, j.std_error));
    }
    Ok(vec![
        Check::new("jarzynski.exact", exact_err, Relation::AtMost, 1e-10, format!("max |G(i beta) - 1| over {CONFIGS} thermal two-level configs")),
        Check::new("jarzynski.monte_carlo", z_max, Relation::AtMost, 3.0, format!("max standard errors from 1, {TRAJECTORIES} trajectories each")),
    ])
}

/// `|diff| / stderr`; a zero standard error admits only a round-off difference.
fn z_score(diff: f64, stderr: f64) -> f64 {
    if stderr > 0.0 {
        diff.abs() / stderr
    } else if diff.abs() < 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn unitality(seed: u64) -> CliResult<Check> {
    let mut worst = 0.0f64;
    for d in 2..=4 {
        for i in 0..12 {
            let mut r = rng(seed, 2, (d * 100 + i) as u64);
            let m = r.random_range(1..=3);
            let config = random_general(&mut r, d, m, i)?;
            worst = worst.max(ExactEngine::new(&config)?.unitality_residual());
        }
    }
    Ok(Check::new("unitality", worst, Relation::AtMost, 1e-10, "random H and bases, d = 2, 3, 4"))
}

fn caption_models() -> CliResult<Vec<WaitingTimeModel<f64>>> {
    let dist = DiscreteWaitingDist::bimodal(0.01, 3.0, 0.3)?;
    Ok(vec![WaitingTimeModel::fixed(1.0)?, WaitingTimeModel::Quenched { dist: dist.clone() }, WaitingTimeModel::Annealed { dist }])
}

fn triple_agreement(seed: u64, threads: usize) -> CliResult<Vec<Check>> {
    const TRAJECTORIES: u64 = 100_000;
    let us = [C::new(0.0, 1.0), C::new(0.3, 0.0), C::new(1.0, 0.0), C::new(-0.7, 0.2)];
    let (mut closed_err, mut z_max) = (0.0f64, 0.0f64);
    for model in caption_models()? {
        for a in [0.0, 0.1, 0.5] {
            for c1 in [0.0, tls::thermal_c1(1.0, 1.0), 0.5, 1.0] {
                let p = TlsParams::new(1.0, a * a, c1, 5, 1.0)?;
                let config = p.protocol_config(model.clone(), seed)?;
                let engine = ExactEngine::new(&config)?;
                for &u in &us {
                    closed_err = closed_err.max((tls::g_model(&p, u, &model)? - engine.characteristic(u)).norm());
                }
                let j = run_mc(&config, TRAJECTORIES, threads)?.jarzynski(1.0);
                z_max = z_max.max(z_score(j.estimate - engine.characteristic(C::new(0.0, 1.0)).re, j.std_error));
            }
        }
    }
    Ok(vec![
        Check::new("triple.closed_form", closed_err, Relation::AtMost, 1e-10, "closed forms against exact enumeration"),
        Check::new("triple.monte_carlo", z_max, Relation::AtMost, 4.0, format!("max standard errors, {TRAJECTORIES} trajectories per point")),
    ])
}

fn affine_lines() -> CliResult<Vec<Check>> {
    let model = WaitingTimeModel::fixed(1.0)?;
    let u = C::new(0.0, 1.0);
    let thermal = tls::thermal_c1(1.0, 1.0);
    let (mut affine, mut crossing, mut constant) = (0.0f64, 0.0f64, 0.0f64);
    for a in [0.0, 0.1, 0.5] {
        let p = TlsParams::new(1.0, a * a, 0.0, 5, 1.0)?;
        let g = |c1: f64| -> CliResult<f64> { Ok(tls::g_model(&p.with_c1(c1)?, u, &model)?.re) };
        let (g0, g1) = (g(0.0)?, g(1.0)?);
        for c1 in linspace(0.0, 1.0, 21) {
            let v = g(c1)?;
            affine = affine.max((v - (g0 + (g1 - g0) * c1)).abs());
            if a == 0.0 {
                constant = constant.max((v - 1.0).abs());
            }
        }
        crossing = crossing.max((g(thermal)? - 1.0).abs());
    }
    Ok(vec![
        Check::new("lines.affine", affine, Relation::AtMost, 1e-10, "G(i beta) linear in c1"),
        Check::new("lines.thermal_crossing", crossing, Relation::AtMost, 1e-10, "all lines equal 1 at the thermal c1"),
        Check::new("lines.a_zero_constant", constant, Relation::AtMost, 1e-10, "a = 0 line identically 1"),
    ])
}

fn mean_heat_structure() -> CliResult<Vec<Check>> {
    let (mut half, mut trivial, mut order, mut max_phi, mut phi_over_e) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, f64::NEG_INFINITY);
    for m in [1usize, 2, 3, 5, 8] {
        for p1 in linspace(0.05, 0.95, 10) {
            let dist = DiscreteWaitingDist::bimodal(0.01, 3.0, p1)?;
            let quenched = WaitingTimeModel::Quenched { dist: dist.clone() };
            let annealed = WaitingTimeModel::Annealed { dist };
            for a2 in linspace(0.05, 0.95, 10) {
                let p = TlsParams::new(1.0, a2, 0.0, m, 1.0)?;
                let mut means = [0.0; 2];
                for (slot, model) in means.iter_mut().zip([&quenched, &annealed]) {
                    let config = p.protocol_config(model.clone(), 0)?;
                    *slot = ExactEngine::new(&config)?.distribution().mean();
                    let phi = tls::phi(&p, model)?;
                    max_phi = max_phi.max((*slot - phi).abs());
                    phi_over_e = phi_over_e.max(phi - p.e);
                    half = half.max(tls::mean_heat(&p.with_c1(0.5)?, model)?.abs());
                    for c1 in linspace(0.0, 0.5, 6) {
                        max_phi = max_phi.max(tls::mean_heat(&p.with_c1(c1)?, model)? - phi);
                    }
                }
                order = order.max(means[0].abs() - means[1].abs());
            }
            for a2 in [0.0, 1.0] {
                let p = TlsParams::new(1.0, a2, 0.0, m, 1.0)?;
                for model in [&quenched, &annealed] {
                    trivial = trivial.max(tls::mean_heat(&p, model)?.abs());
                }
            }
        }
    }
    Ok(vec![
        Check::new("mean_heat.half_filling", half, Relation::AtMost, 1e-12, "c1 = 1/2"),
        Check::new("mean_heat.trivial_basis", trivial, Relation::AtMost, 1e-12, "a2 in {0, 1}"),
        Check::new("mean_heat.annealed_ge_quenched", order.max(0.0), Relation::AtMost, 1e-12, "10 x 10 x 5 grid over (a2, p1, M), exact route"),
        Check::new("mean_heat.max_is_phi", max_phi.max(0.0), Relation::AtMost, 1e-12, "maximum over c1 at c1 = 0 equals phi"),
        Check::new("mean_heat.phi_at_most_e", phi_over_e.max(0.0), Relation::AtMost, 1e-12, "phi - E"),
    ])
}

fn slope_limit() -> CliResult<Vec<Check>> {
    let model = WaitingTimeModel::Quenched { dist: DiscreteWaitingDist::bimodal(0.01, 3.0, 0.3)? };
    let u = C::new(0.0, 1.0);
    let p = TlsParams::new(1.0, 0.2, 0.0, 100, 1.0)?;
    let slope = tls::c1_slope(&p, u, &model)?.re;
    let limit = (tls::g_infinity(&p.with_c1(1.0)?, u) - tls::g_infinity(&p, u)).re;
    let mut zero = 0.0f64;
    for m in 1..=100 {
        zero = zero.max(tls::c1_slope(&TlsParams::new(1.0, 0.0, 0.0, m, 1.0)?, u, &model)?.norm());
    }
    Ok(vec![
        Check::new("slope.m100_near_limit", (slope - limit).abs(), Relation::AtMost, 1e-2, format!("a2 = 0.2: slope {slope:.6} against limit {limit:.6}")),
        Check::new("slope.a2_zero", zero, Relation::AtMost, 1e-12, "a2 = 0 slope for M = 1..100"),
    ])
}

fn small_tau() -> CliResult<Check> {
    let taus = linspace(0.005, 0.05, 10);
    let (mut cases, mut agree) = (0usize, 0usize);
    for (i, &t1) in taus.iter().enumerate() {
        for &t2 in &taus[i + 1..] {
            for p1 in [0.2, 0.5, 0.8] {
                let dist = DiscreteWaitingDist::bimodal(t1, t2, p1)?;
                let fixed = WaitingTimeModel::fixed(dist.mean())?;
                let quenched = WaitingTimeModel::Quenched { dist: dist.clone() };
                let expected = (dist.mean().powi(2) - dist.second_moment()).signum();
                for a2 in [0.1, 0.3] {
                    for m in [2, 5, 10] {
                        let p = TlsParams::new(0.5, a2, 0.0, m, 1.0)?;
                        let diff = tls::mean_heat(&p, &quenched)?.abs() - tls::mean_heat(&p, &fixed)?.abs();
                        if diff.abs() > 1e-14 {
                            cases += 1;
                            agree += usize::from(diff.signum() == expected);
                        }
                    }
                }
            }
        }
    }
    let fraction = if cases == 0 { 1.0 } else { agree as f64 / cases as f64 };
    Ok(Check::new("small_tau.quenched_sign", fraction, Relation::Equal, 1.0, format!("{agree} of {cases} cases with tau Delta E <= 0.05")))
}

fn resonance() -> CliResult<Vec<Check>> {
    let p = TlsParams::new(0.5, 0.2, 0.0, 1, 1.0)?;
    let mut at_resonance = 0.0f64;
    for p1 in [0.0, 1.0] {
        let dist = DiscreteWaitingDist::bimodal(0.1, 0.5, p1)?;
        for n in 1..=3 {
            at_resonance = at_resonance.max(tls::max_mean_heat_annealed(&p, &dist, n as f64 * PI, 5.0)?.abs());
        }
    }
    let dist = DiscreteWaitingDist::bimodal(0.1, 0.1 * 30f64.sqrt(), 0.5)?;
    let xs = linspace(0.1, 4.0 * PI, 2002);
    let mut min = f64::INFINITY;
    for &x in &xs[1..xs.len() - 1] {
        min = min.min(tls::max_mean_heat_annealed(&p, &dist, x, 5.0)?);
    }
    Ok(vec![
        Check::new("resonance.commensurate_zero", at_resonance, Relation::AtMost, 1e-9, "p1 in {0, 1} at Delta E <tau> = pi, 2 pi, 3 pi"),
        Check::new("resonance.incommensurate_min", min, Relation::Above, 1e-4, "p1 = 0.5 over (0.1, 4 pi)"),
    ])
}

fn moments(seed: u64) -> CliResult<Check> {
    let mut worst = 0.0f64;
    for i in 0..50u64 {
        let mut r = rng(seed, 9, i);
        let m = r.random_range(1..=4);
        let config = if i % 2 == 0 {
            let p = TlsParams::new(r.random_range(0.2..1.5), r.random_range(0.0..=1.0), r.random_range(0.0..=1.0), m, 1.0)?;
            p.protocol_config(random_model(&mut r, i as usize)?, 0)?
        } else {
            random_general(&mut r, 3, m, i as usize)?
        };
        let engine = ExactEngine::new(&config)?;
        for order in 1..=4 {
            worst = worst.max(moment_error(&engine, order)?);
        }
    }
    Ok(Check::new("moments", worst, Relation::AtMost, 1e-6, "50 random configs, orders 1-4, relative to max(1, |moment|)"))
}

fn determinism(seed: u64, threads: usize) -> CliResult<Check> {
    let text = json!({
        "system": {"kind": "tls", "e": 1.0, "a2": 0.25, "c1": 0.3},
        "schedule": {"measurements": 5},
        "model": {"kind": "annealed", "taus": [0.01, 3.0], "probs": [0.3, 0.7]},
        "seed": seed,
        "trajectories": 5000
    })
    .to_string();
    let loaded = LoadedSpec { spec: spec::parse(text.as_bytes())?, sha256: spec::sha256_hex(text.as_bytes()) };
    let run = |threads| simulate(&loaded, RunOptions { seed: None, threads }).map(|t| t.render());
    let first = run(1)?;
    let differing = [run(1)?, run(threads.max(2))?, run(threads.max(2) + 1)?].iter().filter(|r| **r != first).count();
    Ok(Check::new("determinism", differing as f64, Relation::Equal, 0.0, "repeated and multi-threaded simulate output is byte-identical"))
}
