use num_complex::Complex64;
use tomolab_core::gaussian_sim::*;
use tomolab_core::geometry::*;
use tomolab_core::kernels::{moment_kernel, MomentIndex};
use tomolab_core::reconstruct::*;
use tomolab_core::{Error, MeasurementRecord, PhaseSampling, QuadratureDataset};

fn grid(modes: usize, nt: usize, np: usize, kind: WeightKind) -> SamplingGrid {
    build_grid(&GridSpec::new(modes, nt, np, kind)).unwrap()
}

fn idx(m: &[u32], n: &[u32]) -> MomentIndex {
    MomentIndex::new(m.to_vec(), n.to_vec()).unwrap()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn exact_moments_match_isserlis_values() {
    // discrete biorthogonality makes the moment estimator exact on the grid
    let state = three_mode_demo_state(1.0);
    let g = grid(3, 10, 10, WeightKind::Moment);
    for eta in [1.0, 0.8] {
        let rec = MomentReconstruction::exact(&state, &g, eta, 1.0, 4).unwrap();
        for i in moment_indices_up_to(3, 4) {
            let got = rec.moment(&i).unwrap().value;
            let want = analytic_moment(&state, &i.m, &i.n, 1.0).unwrap();
            assert!((got - want).norm() < 1e-9 * want.norm().max(1.0), "{i:?} eta={eta}: {got} vs {want}");
        }
    }
}

#[test]
fn exact_symmetric_ordering_moments() {
    let state = displace(&squeeze(&vacuum(1), 0, 0.4).unwrap(), &[c(0.3, -0.2)]).unwrap();
    let g = grid(1, 1, 8, WeightKind::Moment);
    for s in [0.0, -1.0, 0.5] {
        let rec = MomentReconstruction::exact(&state, &g, 0.9, s, 3).unwrap();
        for i in moment_indices_up_to(1, 3) {
            let got = rec.moment(&i).unwrap().value;
            let want = analytic_moment(&state, &i.m, &i.n, s).unwrap();
            assert!((got - want).norm() < 1e-10, "s={s} {i:?}: {got} vs {want}");
        }
    }
}

#[test]
fn post_scaled_features_equal_direct_kernel_average() {
    let state = three_mode_demo_state(1.0);
    let g = grid(3, 4, 4, WeightKind::Moment);
    let data = simulate_dataset(&state, &g, 30, 0.8, 7).unwrap();
    let rec = MomentReconstruction::from_dataset(&data, 1.0, 2).unwrap();
    for i in [idx(&[1, 0, 0], &[1, 0, 0]), idx(&[1, 0, 0], &[0, 1, 0]), idx(&[0, 0, 2], &[0, 0, 0])] {
        let mut direct = c(0.0, 0.0);
        for r in &data.records {
            let gp = &g.points[r.grid_index as usize];
            direct += gp.weight * moment_kernel(&i, r.x_value, &gp.config, 1.0, 0.8).unwrap() / 30.0;
        }
        let got = rec.moment(&i).unwrap().value;
        assert!((got - direct).norm() < 1e-10 * direct.norm().max(1.0), "{i:?}: {got} vs {direct}");
    }
}

#[test]
fn exact_rho_matches_fock_expansion() {
    let cases = [
        coherent(&[c(0.6, 0.3)]),
        squeeze(&vacuum(1), 0, 0.3).unwrap(),
        displace(&squeeze(&vacuum(1), 0, 0.2).unwrap(), &[c(-0.4, 0.1)]).unwrap(),
    ];
    // the phase sum folds in ρ_ab with a − b ≡ m − n (mod N_ψ); at N_ψ = 24 the squeezed
    // state's ρ_{20,0} still shifts ρ_40 by 1e-7, at 48 the residue is negligible
    let g = grid(1, 1, 48, WeightKind::Quasidistribution);
    for state in &cases {
        for eta in [1.0, 0.85] {
            let rec = RhoReconstruction::exact(state, &g, eta, 4, 100).unwrap();
            let truth = analytic_rho(state, 4).unwrap();
            let table = rec.table().unwrap();
            for e in &table.entries {
                let EntryKey::Fock { m, n } = &e.key else { unreachable!() };
                let want = truth.get(&[m[0] as usize], &[n[0] as usize]);
                assert!((e.estimate.value - want).norm() < 1e-9, "{m:?}{n:?} eta={eta}: {} vs {want}", e.estimate.value);
            }
        }
    }
}

#[test]
fn two_mode_rho_converges_with_the_angle_grid() {
    // phase sums are exact, the θ sum is a quadrature with O(N_θ⁻²) error
    let state = beam_splitter(&squeeze(&coherent(&[c(0.3, 0.0), c(0.0, 0.2)]), 0, 0.2).unwrap(), 0, 1, 0.5).unwrap();
    let truth = analytic_rho(&state, 2).unwrap();
    let worst = |nt: usize, rule: QuadratureRule| {
        let g = build_grid(&GridSpec::new(2, nt, 12, WeightKind::Quasidistribution).with_rule(rule)).unwrap();
        let rec = RhoReconstruction::exact(&state, &g, 0.9, 2, 60).unwrap();
        fock_indices(2, 2)
            .iter()
            .map(|i| {
                let m: Vec<usize> = i.m.iter().map(|&k| k as usize).collect();
                let n: Vec<usize> = i.n.iter().map(|&k| k as usize).collect();
                (rec.element(i).unwrap().value - truth.get(&m, &n)).norm()
            })
            .fold(0.0, f64::max)
    };
    for rule in [QuadratureRule::RightEndpoint, QuadratureRule::Midpoint] {
        let (coarse, fine) = (worst(8, rule), worst(32, rule));
        assert!(coarse < 2e-2 && fine < 1e-3, "{rule:?}: {coarse:e} -> {fine:e}");
        // quadratic convergence: 4x the angles, 16x smaller error
        assert!(coarse / fine > 12.0, "{rule:?}: {coarse:e} -> {fine:e}");
    }
}

#[test]
fn exact_quasidistribution_bias_from_angle_grid() {
    // the phase sum is exact; on one mode there is no angle grid at all
    let state = squeeze(&coherent(&[c(0.5, -0.2)]), 0, 0.3).unwrap();
    let g = grid(1, 1, 40, WeightKind::Quasidistribution);
    let pts: Vec<_> = [-1.0, 0.0, 0.4, 1.2].iter().map(|&a| PhaseSpacePoint::new(vec![c(a, 0.3 * a)])).collect();
    let t = exact_quasidist(&state, &g, 0.9, -1.0, &pts, 80).unwrap();
    for (p, e) in pts.iter().zip(&t.entries) {
        let want = analytic_q(&state, p).unwrap();
        assert!((e.estimate.value.re - want).abs() < 1e-8, "{p:?}");
    }
    // two modes: the θ sum carries an O(N_θ⁻²) bias, small on a fine midpoint grid
    let two = beam_splitter(&squeeze(&vacuum(2), 0, 0.4).unwrap(), 0, 1, 0.6).unwrap();
    let p = PhaseSpacePoint::diagonal(2, 0.3);
    let want = analytic_q(&two, &p).unwrap();
    let mid = build_grid(&GridSpec::new(2, 40, 12, WeightKind::Quasidistribution).with_rule(QuadratureRule::Midpoint)).unwrap();
    let got = exact_quasidist(&two, &mid, 1.0, -1.0, &[p.clone()], 60).unwrap().entries[0].estimate.value.re;
    assert!((got - want).abs() < 1e-3 * want, "midpoint: {got} vs {want}");
}

#[test]
fn sampled_vacuum_quantities() {
    let g = grid(1, 1, 20, WeightKind::Quasidistribution);
    let data = simulate_dataset(&vacuum(1), &g, 5_000, 1.0, 3).unwrap();
    let q = estimate_quasidist(&data, -1.0, &[PhaseSpacePoint::diagonal(1, 0.0)]).unwrap();
    let e = q.entries[0].estimate;
    let want = 1.0 / std::f64::consts::PI;
    assert!((e.value.re - want).abs() < 5.0 * e.std_error_re, "{} ± {}", e.value.re, e.std_error_re);
    let rho = RhoReconstruction::from_dataset(&data, 3).unwrap();
    let r00 = rho.element(&idx(&[0], &[0])).unwrap();
    assert!((r00.value.re - 1.0).abs() < 5.0 * r00.std_error_re);
    let tr = rho.trace().unwrap();
    assert!((tr.value.re - 1.0).abs() < 5.0 * tr.std_error_re);
    let table = rho.table().unwrap();
    for e in &table.entries {
        let EntryKey::Fock { m, n } = &e.key else { unreachable!() };
        let conj = table.get(&EntryKey::Fock { m: n.clone(), n: m.clone() }).unwrap();
        assert_eq!(e.estimate.value, conj.value.conj());
        let direct = rho.element(&idx(m, n)).unwrap();
        assert!((direct.value - e.estimate.value).norm() < 1e-12);
        assert!((direct.std_error_re - e.estimate.std_error_re).abs() < 1e-9 * direct.std_error_re.max(1e-12));
    }
}

#[test]
fn sampled_moments_with_mandel_parameter() {
    let state = three_mode_demo_state(1.0);
    let g = grid(3, 10, 10, WeightKind::Moment);
    let data = simulate_dataset(&state, &g, 200, 0.8, 11).unwrap();
    let table = estimate_moments(&data, 1.0, 4).unwrap();
    assert_eq!(table.len(), 210);
    for j in 0..3 {
        let mut e = vec![0; 3];
        e[j] = 1;
        let want = analytic_moment(&state, &e, &e, 1.0).unwrap().re;
        let got = table.get(&EntryKey::Moment { m: e.clone(), n: e }).unwrap();
        assert!((got.value.re - want).abs() < 5.0 * got.std_error_re);
    }
    let q = mandel_q(&table, 0).unwrap();
    let n1 = analytic_moment(&state, &[1, 0, 0], &[1, 0, 0], 1.0).unwrap().re;
    let n2 = analytic_moment(&state, &[2, 0, 0], &[2, 0, 0], 1.0).unwrap().re;
    let want = (n2 - n1 * n1) / n1;
    assert!((q.value - want).abs() < 5.0 * q.std_error, "{} ± {} vs {want}", q.value, q.std_error);
}

#[test]
fn mandel_parameter_is_undefined_for_vacuum() {
    let g = grid(1, 1, 6, WeightKind::Moment);
    let rec = MomentReconstruction::exact(&vacuum(1), &g, 1.0, 1.0, 4).unwrap();
    let e = mandel_q(&rec.table().unwrap(), 0).unwrap_err();
    assert!(matches!(e, Error::Undefined(_)));
    // a coherent state is Poissonian
    let rec = MomentReconstruction::exact(&coherent(&[c(1.2, 0.5)]), &g, 1.0, 1.0, 4).unwrap();
    assert!(mandel_q(&rec.table().unwrap(), 0).unwrap().value.abs() < 1e-9);
}

#[test]
fn phase_randomized_data_give_diagonal_quantities_only() {
    let state = coherent(&[c(1.0, 0.5)]);
    let g = grid(1, 1, 12, WeightKind::Quasidistribution);
    let data = simulate_dataset_with(&state, &g, 4_000, 0.9, 5, PhaseSampling::Randomized).unwrap();
    let rho = RhoReconstruction::from_dataset(&data, 3).unwrap();
    let truth = analytic_rho(&state, 3).unwrap();
    for k in 0..=3u32 {
        let e = rho.element(&idx(&[k], &[k])).unwrap();
        let want = truth.get(&[k as usize], &[k as usize]).re;
        assert!((e.value.re - want).abs() < 5.0 * e.std_error_re, "k={k}");
    }
    assert!(matches!(rho.element(&idx(&[1], &[0])), Err(Error::InvalidArgument(_))));
    assert!(rho.table().unwrap().entries.iter().all(|e| matches!(&e.key, EntryKey::Fock { m, n } if m == n)));
    assert!(estimate_quasidist(&data, -1.0, &[PhaseSpacePoint::diagonal(1, 0.0)]).is_err());
}

#[test]
fn result_is_independent_of_partitioning_and_order() {
    let g = grid(2, 4, 5, WeightKind::Quasidistribution);
    let two = beam_splitter(&squeeze(&vacuum(2), 0, 0.5).unwrap(), 0, 1, 0.7).unwrap();
    let data = simulate_dataset(&two, &g, 40, 0.9, 17).unwrap();
    let pts = [PhaseSpacePoint::diagonal(2, 0.2), PhaseSpacePoint::diagonal(2, -0.5)];
    let run = |threads: usize, d: &QuadratureDataset| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| (estimate_quasidist(d, -1.0, &pts).unwrap(), estimate_rho(d, 1).unwrap()))
    };
    let (q1, r1) = run(1, &data);
    let mut shuffled = data.clone();
    shuffled.records.reverse();
    shuffled.records.rotate_left(123);
    for (threads, d) in [(3, &data), (4, &shuffled), (1, &shuffled)] {
        let (q, r) = run(threads, d);
        for (a, b) in q.entries.iter().zip(&q1.entries).chain(r.entries.iter().zip(&r1.entries)) {
            assert!((a.estimate.value - b.estimate.value).norm() < 1e-12);
            assert!((a.estimate.std_error_re - b.estimate.std_error_re).abs() < 1e-12);
        }
    }
}

#[test]
fn estimator_preconditions() {
    let qg = grid(1, 1, 8, WeightKind::Quasidistribution);
    let mg = grid(1, 1, 8, WeightKind::Moment);
    let qd = simulate_dataset(&vacuum(1), &qg, 3, 1.0, 1).unwrap();
    let md = simulate_dataset(&vacuum(1), &mg, 3, 1.0, 1).unwrap();
    assert!(matches!(estimate_moments(&qd, 1.0, 2), Err(Error::GridKind { .. })));
    assert!(matches!(estimate_rho(&md, 2), Err(Error::GridKind { .. })));
    assert!(matches!(estimate_quasidist(&md, -1.0, &[]), Err(Error::GridKind { .. })));

    let sparse: Vec<_> = qd.records.iter().copied().filter(|r| r.grid_index != 5).collect();
    let holes = QuadratureDataset::new(qg.clone(), 1.0, None, PhaseSampling::Grid, sparse).unwrap();
    assert!(matches!(estimate_rho(&holes, 2), Err(Error::UnsampledGridPoint(5))));

    let empty = QuadratureDataset::new(qg.clone(), 1.0, None, PhaseSampling::Grid, vec![]).unwrap();
    assert!(matches!(estimate_quasidist(&empty, -1.0, &[]), Err(Error::EmptyDataset)));

    let e = estimate_rho(&qd, 4).unwrap_err();
    assert!(e.is_bound() && e.to_string().contains("2*cutoff < N_psi"), "{e}");
    let e = estimate_quasidist(&qd, 0.5, &[PhaseSpacePoint::diagonal(1, 0.0)]).unwrap_err();
    assert!(e.is_bound());
    let lossy = QuadratureDataset::new(qg, 0.5, None, PhaseSampling::Grid, qd.records.clone()).unwrap();
    assert!(estimate_rho(&lossy, 1).unwrap_err().to_string().contains("eta must exceed 1/2"));
    let e = estimate_moments(&md, 1.0, 8).unwrap_err();
    assert!(e.to_string().contains("N_psi"), "{e}");
}

#[test]
fn single_record_points_report_zero_spread() {
    let g = grid(1, 1, 4, WeightKind::Moment);
    let records = (0..4).map(|i| MeasurementRecord { grid_index: i, x_value: 0.3 * i as f64 }).collect();
    let d = QuadratureDataset::new(g, 1.0, None, PhaseSampling::Grid, records).unwrap();
    let t = estimate_moments(&d, 1.0, 2).unwrap();
    assert!(t.entries.iter().all(|e| e.estimate.std_error() == 0.0 && e.estimate.value.norm().is_finite()));
}
