use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::disorder::{
    enumerate_fixed_total_time, enumerate_realizations, trajectory_rng, DiscreteWaitingDist, SequenceRealization,
    DEFAULT_REALIZATION_CAP,
};
use crate::quantum::{exp_iu_h, frobenius, sequence_superop, ComplexMatrix, DensityMatrix, OutcomeSequence};
use crate::test_support::*;

/// All outcome sequences of length `m` over `k` outcomes.
fn all_sequences(k: usize, m: usize) -> Vec<Vec<usize>> {
    (0..k.pow(m as u32))
        .map(|mut code| {
            (0..m)
                .map(|_| {
                    let d = code % k;
                    code /= k;
                    d
                })
                .collect()
        })
        .collect()
}

fn realizations(config: &ProtocolConfig<f64>) -> Vec<SequenceRealization<f64>> {
    match config.schedule() {
        Schedule::Measurements(m) => enumerate_realizations(config.model(), m, DEFAULT_REALIZATION_CAP).unwrap(),
        Schedule::TotalTime(t) => enumerate_fixed_total_time(config.model(), t, DEFAULT_REALIZATION_CAP).unwrap(),
    }
}

fn operators(config: &ProtocolConfig<f64>, taus: &[f64]) -> Vec<ComplexMatrix<f64>> {
    let d = config.dim();
    if taus.is_empty() {
        return vec![ComplexMatrix::identity(d, d)];
    }
    all_sequences(config.basis().len(), taus.len())
        .into_iter()
        .map(|ks| {
            let seq = OutcomeSequence::new(ks, taus.to_vec()).unwrap();
            sequence_superop(config.basis(), config.h(), &seq).unwrap()
        })
        .collect()
}

/// `p(n, m) = p_n sum_k |<E_m|V|E_n>|^2` for one waiting-time vector.
fn brute_joint(config: &ProtocolConfig<f64>, taus: &[f64]) -> Vec<f64> {
    let d = config.dim();
    let vecs = config.h().eigenvectors();
    let rotated = vecs.adjoint() * config.rho0().matrix() * vecs;
    let mut joint = vec![0.0; d * d];
    for v in operators(config, taus) {
        let amps = vecs.adjoint() * v * vecs;
        for n in 0..d {
            for m in 0..d {
                joint[n * d + m] += rotated[(n, n)].re * amps[(m, n)].norm_sqr();
            }
        }
    }
    joint
}

/// Literal trace `sum_r w sum_k Tr[e^{iuH} V e^{-iuH} rho V^dagger]`.
fn brute_characteristic(config: &ProtocolConfig<f64>, rho: &DensityMatrix<f64>, u: Complex<f64>) -> Complex<f64> {
    let fwd = exp_iu_h(config.h(), u);
    let bwd = exp_iu_h(config.h(), -u);
    realizations(config)
        .iter()
        .map(|r| {
            operators(config, &r.taus)
                .iter()
                .map(|v| (&fwd * v * &bwd * rho.matrix() * v.adjoint()).trace())
                .sum::<Complex<f64>>()
                * r.weight
        })
        .sum()
}

fn random_config(rng: &mut ChaCha8Rng, i: usize) -> ProtocolConfig<f64> {
    let d = 2 + i % 2;
    let h = random_hamiltonian(d, rng);
    let basis = random_basis(d, rng);
    let rho = random_state(d, rng);
    let m = 1 + (i / 3) % 4;
    let model = random_model(i, rng);
    ProtocolConfig::new(h, basis, rho, Schedule::Measurements(m), model, 0.8, i as u64).unwrap()
}

#[test]
fn config_validation() {
    let h = tls_hamiltonian(1.0);
    let rho = tls_state(&h, 0.3);
    let model = crate::disorder::WaitingTimeModel::fixed(0.5).unwrap();
    let ok = ProtocolConfig::new(h.clone(), tls_basis(0.2), rho.clone(), Schedule::Measurements(3), model.clone(), 1.0, 0);
    assert!(ok.is_ok());
    let zero_m = ProtocolConfig::new(h.clone(), tls_basis(0.2), rho.clone(), Schedule::Measurements(0), model.clone(), 1.0, 0);
    assert!(matches!(zero_m, Err(Error::InvalidParameter { name: "m_count", .. })));
    let neg_beta = ProtocolConfig::new(h.clone(), tls_basis(0.2), rho.clone(), Schedule::Measurements(1), model.clone(), -1.0, 0);
    assert!(neg_beta.is_err());
    let bad_t = ProtocolConfig::new(h.clone(), tls_basis(0.2), rho.clone(), Schedule::TotalTime(0.0), model.clone(), 1.0, 0);
    assert!(bad_t.is_err());
    let h3 = HermitianOperator::from_diagonal(&[0.0, 1.0, 2.0]).unwrap();
    let wrong_dim = ProtocolConfig::new(h3, tls_basis(0.2), rho, Schedule::Measurements(1), model, 1.0, 0);
    assert!(matches!(wrong_dim, Err(Error::DimensionMismatch { .. })));
}

#[test]
fn energy_basis_gives_zero_heat() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..6 {
        let d = 2 + i % 2;
        let h = random_hamiltonian(d, &mut rng);
        let basis = MeasurementBasis::energy_basis(&h);
        let rho = random_state(d, &mut rng);
        let model = random_model(i, &mut rng);
        let config = ProtocolConfig::new(h, basis, rho, Schedule::Measurements(3), model, 1.3, 1).unwrap();
        let dist = exact_distribution(&config).unwrap();
        // numerically diagonalized eigenvectors leave round-off-sized off-gap atoms
        assert!((dist.prob_at(0.0) - 1.0).abs() < 1e-10);
        assert!(dist.atoms().iter().all(|a| a.q == 0.0 || a.prob < 1e-24));
        let mut trng = trajectory_rng(1, 0);
        for _ in 0..50 {
            assert_eq!(run_trajectory(&config, &mut trng).unwrap().q, 0.0);
        }
        let jar = jarzynski_mc(&config, 500).unwrap();
        assert_eq!(jar.estimate, 1.0);
        assert_eq!(jar.std_error, 0.0);
        for order in 1..=4 {
            let mo = moment(&config, order).unwrap();
            assert!(mo.direct.abs() < 1e-20);
            assert!(mo.finite_difference.abs() < 1e-6);
        }
    }
}

#[test]
fn zero_waiting_time_in_energy_basis() {
    let h = tls_hamiltonian(1.0);
    let rho = tls_state(&h, 0.3);
    let model = crate::disorder::WaitingTimeModel::Fixed { tau_bar: 0.0 };
    let config =
        ProtocolConfig::new(h.clone(), MeasurementBasis::energy_basis(&h), rho, Schedule::Measurements(1), model, 1.0, 0)
            .unwrap();
    let dist = exact_distribution(&config).unwrap();
    assert_eq!(dist.atoms(), &[HeatAtom { q: 0.0, prob: 1.0 }]);
}

#[test]
fn exact_joint_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..24 {
        let config = random_config(&mut rng, i);
        let engine = ExactEngine::new(&config).unwrap();
        let d = config.dim();
        let mut expected = vec![0.0; d * d];
        for r in realizations(&config) {
            for (e, b) in expected.iter_mut().zip(brute_joint(&config, &r.taus)) {
                *e += r.weight * b;
            }
        }
        for (a, b) in engine.joint().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "config {i}: {a} vs {b}");
        }
        let dist = engine.distribution();
        assert!((dist.total_probability() - 1.0).abs() < 1e-10);
        assert!(dist.atoms().iter().all(|a| a.prob >= 0.0));
    }
}

#[test]
fn annealed_distribution_is_realization_mixture() {
    let dist = DiscreteWaitingDist::bimodal(0.4, 1.3, 0.35).unwrap();
    let config = tls_config(1.0, 0.3, 0.8, 3, crate::disorder::WaitingTimeModel::Annealed { dist });
    let engine = ExactEngine::new(&config).unwrap();
    assert_eq!(engine.realizations().len(), 8);
    let mut mixture = vec![0.0; 4];
    for r in engine.realizations() {
        for (acc, p) in mixture.iter_mut().zip(brute_joint(&config, &r.taus)) {
            *acc += r.weight * p;
        }
    }
    let e = config.h().eigenvalues();
    let expected = HeatDistribution::from_joint(e, &mixture);
    let got = engine.distribution();
    assert_eq!(got.len(), expected.len());
    for (a, b) in got.atoms().iter().zip(expected.atoms()) {
        assert_eq!(a.q, b.q);
        assert!((a.prob - b.prob).abs() < 1e-12);
    }
}

#[test]
fn heat_support_is_energy_gaps() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for i in 0..12 {
        let config = random_config(&mut rng, i);
        let e = config.h().eigenvalues();
        let gaps: Vec<f64> = e.iter().flat_map(|em| e.iter().map(move |en| em - en)).collect();
        for atom in exact_distribution(&config).unwrap().atoms() {
            assert!(gaps.contains(&atom.q), "{} is not an exact gap", atom.q);
        }
    }
}

#[test]
fn characteristic_function_matches_fourier_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for i in 0..30 {
        let config = random_config(&mut rng, i);
        let engine = ExactEngine::new(&config).unwrap();
        let dist = engine.distribution();
        for u in [-2.0, -1.0, 0.0, 0.7, 1.0, 2.0] {
            let u = Complex::new(u, 0.0);
            let g = engine.characteristic(u);
            assert!((g - dist.characteristic(u)).norm() < 1e-10, "config {i}, u {u}");
        }
        assert!((engine.characteristic(Complex::new(0.0, 0.0)) - 1.0).norm() < 1e-12);
    }
}

#[test]
fn characteristic_function_matches_literal_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for i in 0..12 {
        let config = random_config(&mut rng, i);
        let dephased = config.rho0().dephased_in(config.h());
        for u in [Complex::new(0.3, 0.2), Complex::new(-1.1, 0.0), Complex::new(0.0, 0.8)] {
            let got = characteristic_function(&config, u).unwrap();
            let want = brute_characteristic(&config, &dephased, u);
            assert!((got - want).norm() < 1e-10 * want.norm().max(1.0), "config {i}: {got} vs {want}");
        }
    }
}

#[test]
fn characteristic_function_is_unaffected_by_energy_coherences() {
    // only the energy populations of rho0 enter the two-point statistics
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let config = random_config(&mut rng, 1);
    let dephased = config.rho0().dephased_in(config.h());
    let other = config.clone().with_rho0(dephased).unwrap();
    for u in [Complex::new(0.5, 0.0), Complex::new(0.0, 0.5)] {
        let a = characteristic_function(&config, u).unwrap();
        let b = characteristic_function(&other, u).unwrap();
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn jarzynski_identity_for_thermal_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for i in 0..120 {
        let d = 2 + i % 2;
        let h = random_hamiltonian(d, &mut rng);
        let beta = 0.1 + 2.0 * rand::Rng::random::<f64>(&mut rng);
        let rho = DensityMatrix::thermal(&h, beta);
        let basis = random_basis(d, &mut rng);
        let model = random_model(i, &mut rng);
        let m = 1 + i % 4;
        let config = ProtocolConfig::new(h, basis, rho, Schedule::Measurements(m), model, beta, 0).unwrap();
        let engine = ExactEngine::new(&config).unwrap();
        let g = engine.characteristic(Complex::new(0.0, beta));
        assert!((g - 1.0).norm() < 1e-10, "config {i}: G(i beta) = {g}");
        assert!((engine.distribution().jarzynski(beta) - 1.0).abs() < 1e-10);
    }
}

#[test]
fn unitality() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for i in 0..6 {
        let d = 2 + i % 3;
        let h = random_hamiltonian(d, &mut rng);
        let config = ProtocolConfig::new(
            h,
            random_basis(d, &mut rng),
            random_state(d, &mut rng),
            Schedule::Measurements(1),
            random_model(i, &mut rng),
            1.0,
            0,
        )
        .unwrap();
        assert!(unitality_check(&config).unwrap() < 1e-14);
    }
    let dist = DiscreteWaitingDist::bimodal(0.2, 1.7, 0.6).unwrap();
    let config = tls_config(1.0, 0.2, 0.9, 5, crate::disorder::WaitingTimeModel::Annealed { dist });
    let residual = unitality_check(&config).unwrap();
    assert!(residual < 1e-10);
    let mixed = config.clone().with_rho0(DensityMatrix::maximally_mixed(2)).unwrap();
    assert_eq!(unitality_check(&mixed).unwrap(), residual);
}

#[test]
fn unitality_fails_for_incomplete_operators() {
    // the check is sensitive: dropping one outcome sequence breaks it
    let config = tls_config(1.0, 0.3, 0.5, 2, crate::disorder::WaitingTimeModel::fixed(0.6).unwrap());
    let ops = operators(&config, &[0.6, 0.6]);
    let partial: ComplexMatrix<f64> = ops[1..].iter().map(|v| v * v.adjoint()).sum();
    assert!(frobenius(&(partial - ComplexMatrix::identity(2, 2))) > 1e-3);
}

#[test]
fn enumeration_cap() {
    let config = tls_config(1.0, 0.3, 0.5, 24, crate::disorder::WaitingTimeModel::fixed(0.6).unwrap());
    assert!(matches!(exact_distribution(&config), Err(Error::EnumerationTooLarge { required, cap })
        if required == 1 << 24 && cap == DEFAULT_TERM_CAP));
    let dist = DiscreteWaitingDist::bimodal(0.2, 1.7, 0.6).unwrap();
    let annealed = tls_config(1.0, 0.3, 0.5, 12, crate::disorder::WaitingTimeModel::Annealed { dist });
    assert!(matches!(
        characteristic_function(&annealed, Complex::new(0.1, 0.0)),
        Err(Error::EnumerationTooLarge { required, .. }) if required == 1 << 24
    ));
    assert!(ExactEngine::with_cap(&annealed, 1 << 24).is_ok());
}

#[test]
fn moments_agree_between_routes() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for i in 0..8 {
        let a2 = 0.05 + 0.9 * rand::Rng::random::<f64>(&mut rng);
        let c1 = rand::Rng::random::<f64>(&mut rng);
        let e = 0.3 + 1.5 * rand::Rng::random::<f64>(&mut rng);
        let model = random_model(i, &mut rng);
        let config = tls_config(e, a2, c1, 5, model);
        for order in 1..=4 {
            let mo = moment(&config, order).unwrap();
            assert!((mo.direct - mo.finite_difference).abs() <= 1e-6 * mo.direct.abs().max(1.0));
        }
    }
    for i in 0..6 {
        let config = random_config(&mut rng, i + 1);
        for order in 1..=4 {
            moment(&config, order).unwrap();
        }
    }
}

#[test]
fn balanced_populations_give_zero_mean_heat() {
    let model = crate::disorder::WaitingTimeModel::fixed(0.9).unwrap();
    let config = tls_config(1.0, 0.3, 0.5, 4, model);
    assert!(moment(&config, 1).unwrap().direct.abs() < 1e-14);
    assert!(moment(&config, 0).is_err());
    assert!(moment(&config, 5).is_err());
}

#[test]
fn monte_carlo_matches_exact() {
    let config = tls_config(1.0, 0.3, 0.8, 5, crate::disorder::WaitingTimeModel::fixed(0.7).unwrap());
    let exact = exact_distribution(&config).unwrap();
    let n = 100_000u64;
    let tally = simulate(&config, n, 4).unwrap();
    let empirical = tally.distribution();
    assert_eq!(empirical.kind(), DistributionKind::Empirical { n_samples: n });
    for atom in exact.atoms() {
        let p = atom.prob;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        let f = empirical.prob_at(atom.q);
        assert!((f - p).abs() <= 4.0 * sigma + 1e-12, "q {}: {f} vs {p}", atom.q);
    }
    assert!(empirical.total_variation(&exact) < 0.02);
}

#[test]
fn monte_carlo_total_variation_for_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for i in 0..3 {
        let model = random_model(i, &mut rng);
        let config = tls_config(1.2, 0.35, 0.6, 1 + 2 * i, model);
        let exact = exact_distribution(&config).unwrap();
        let empirical = simulate(&config, 100_000, 4).unwrap().distribution();
        assert!(empirical.total_variation(&exact) < 0.02);
    }
}

#[test]
fn simulation_is_independent_of_thread_count() {
    let dist = DiscreteWaitingDist::bimodal(0.2, 1.7, 0.6).unwrap();
    let config = tls_config(1.0, 0.3, 0.8, 4, crate::disorder::WaitingTimeModel::Annealed { dist });
    let one = simulate(&config, 2_000, 1).unwrap();
    for threads in [2, 3, 8] {
        assert_eq!(simulate(&config, 2_000, threads).unwrap(), one);
    }
    let reseeded = config.clone().with_seed(8);
    assert_ne!(simulate(&reseeded, 2_000, 1).unwrap(), one);
}

#[test]
fn trajectory_records_are_consistent() {
    let dist = DiscreteWaitingDist::bimodal(0.2, 1.7, 0.6).unwrap();
    let config = tls_config(1.0, 0.3, 0.8, 4, crate::disorder::WaitingTimeModel::Quenched { dist });
    let sampler = TrajectorySampler::new(&config).unwrap();
    let e = config.h().eigenvalues();
    let mut rng = trajectory_rng(4, 2);
    for _ in 0..200 {
        let r = sampler.run_trajectory(&mut rng).unwrap();
        assert_eq!(r.ks.len(), 4);
        assert!(r.taus.iter().all(|&t| t == r.taus[0]));
        assert_eq!(r.q, e[r.m] - e[r.n]);
    }
}

#[test]
fn monte_carlo_jarzynski_for_thermal_state() {
    let config = thermal_tls_config(1.0, 0.3, 1.0, 5, crate::disorder::WaitingTimeModel::fixed(0.7).unwrap());
    let est = jarzynski_mc(&config, 10_000).unwrap();
    assert!(est.std_error > 0.0);
    assert!((est.estimate - 1.0).abs() <= 3.0 * est.std_error, "{est:?}");
    assert!(jarzynski_mc(&config, 1).is_err());
}

#[test]
fn monte_carlo_jarzynski_for_non_thermal_state() {
    let config = tls_config(1.0, 0.25, 0.9, 3, crate::disorder::WaitingTimeModel::fixed(0.7).unwrap());
    let exact = characteristic_function(&config, Complex::new(0.0, config.beta())).unwrap();
    assert!(exact.im.abs() < 1e-12);
    let est = jarzynski_mc(&config, 20_000).unwrap();
    assert!((est.estimate - exact.re).abs() <= 3.0 * est.std_error, "{est:?} vs {exact}");
}

#[test]
fn total_time_schedule() {
    let h = tls_hamiltonian(1.0);
    let rho = tls_state(&h, 0.7);
    let fixed = crate::disorder::WaitingTimeModel::fixed(1.0).unwrap();
    let by_time =
        ProtocolConfig::new(h.clone(), tls_basis(0.3), rho.clone(), Schedule::TotalTime(5.0), fixed.clone(), 1.0, 0)
            .unwrap();
    let by_count = by_time.clone().with_schedule(Schedule::Measurements(5)).unwrap();
    assert_eq!(exact_distribution(&by_time).unwrap(), exact_distribution(&by_count).unwrap());

    let dist = DiscreteWaitingDist::bimodal(0.4, 1.1, 0.5).unwrap();
    let annealed = by_time.clone().with_model(crate::disorder::WaitingTimeModel::Annealed { dist }).unwrap();
    let engine = ExactEngine::new(&annealed).unwrap();
    let exact = engine.distribution();
    assert!((exact.total_probability() - 1.0).abs() < 1e-10);
    assert!(engine.unitality_residual() < 1e-10);
    let empirical = simulate(&annealed, 50_000, 4).unwrap().distribution();
    assert!(empirical.total_variation(&exact) < 0.02);

    // a waiting time longer than the horizon leaves only the energy measurements
    let long = by_time.with_model(crate::disorder::WaitingTimeModel::fixed(7.0).unwrap()).unwrap();
    assert_eq!(exact_distribution(&long).unwrap().atoms(), &[HeatAtom { q: 0.0, prob: 1.0 }]);
    assert_eq!(characteristic_function(&long, Complex::new(0.4, 0.1)).unwrap(), Complex::new(1.0, 0.0));
}

#[test]
fn distribution_helpers() {
    let e = [-1.0_f64, 0.5];
    let dist = HeatDistribution::from_joint(&e, &[0.25, 0.25, 0.0, 0.5]);
    assert_eq!(dist.atoms(), &[HeatAtom { q: 0.0, prob: 0.75 }, HeatAtom { q: 1.5, prob: 0.25 }]);
    assert_eq!(dist.prob_at(1.5), 0.25);
    assert_eq!(dist.prob_at(-1.5), 0.0);
    assert_eq!(dist.total_variation(&dist), 0.0);
    let counts = HeatDistribution::from_counts(&e, &[3, 1, 0, 4]);
    assert_eq!(counts.kind(), DistributionKind::Empirical { n_samples: 8 });
    assert_eq!(counts.total_probability(), 1.0);
    assert!((counts.total_variation(&dist) - 0.125).abs() < 1e-15);
}

#[test]
fn nearly_equal_gaps_merge() {
    let e = [0.0_f64, 1.0, 2.0 + 5e-13];
    let mut joint = vec![0.0; 9];
    joint[1] = 0.5; // 0 -> 1, q = 1
    joint[5] = 0.5; // 1 -> 2, q = 1 + 5e-13
    let dist = HeatDistribution::from_joint(&e, &joint);
    assert_eq!(dist.len(), 1);
    assert_eq!(dist.atoms()[0].q, 1.0);
}

#[test]
fn single_precision_smoke() {
    let h = HermitianOperator::<f32>::from_diagonal(&[-1.0, 1.0]).unwrap();
    let a = 0.3f32.sqrt();
    let b = 0.7f32.sqrt();
    let v = ComplexMatrix::<f32>::from_row_slice(
        2,
        2,
        &[Complex::new(-b, 0.0), Complex::new(a, 0.0), Complex::new(a, 0.0), Complex::new(b, 0.0)],
    );
    let basis = MeasurementBasis::from_vectors(v, vec![1.0, -1.0]).unwrap();
    let rho = DensityMatrix::thermal(&h, 1.0);
    let model = crate::disorder::WaitingTimeModel::fixed(0.7f32).unwrap();
    let config = ProtocolConfig::new(h, basis, rho, Schedule::Measurements(4), model, 1.0, 0).unwrap();
    let g = characteristic_function(&config, Complex::new(0.0, 1.0)).unwrap();
    assert!((g - 1.0).norm() < 1e-4);
    let tally = simulate(&config, 1_000, 2).unwrap();
    assert_eq!(tally.n_samples(), 1_000);
}
