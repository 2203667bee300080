mod common;

use approx::assert_abs_diff_eq;
use infoflow::powermodels::*;
use infoflow::sysmodel::LinearSystem;
use infoflow::Error;
use nalgebra::{dmatrix, DMatrix};
use proptest::prelude::*;
use rand::Rng;

fn state(s: [f64; 4]) -> ThreeBusState {
    ThreeBusState::from_slice(&s)
}

#[test]
fn analytic_jacobian_matches_finite_differences() {
    let model = ThreeBusModel::default();
    let mut rng = common::rng(12);
    for _ in 0..100 {
        let s = state([
            rng.random_range(-0.5..1.0),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(0.6..1.3),
        ]);
        let q1 = rng.random_range(1.0..11.0);
        let analytic = model.jacobian(&s, q1);
        let numeric = model.linearize(&s, q1, 1e-6);
        let scale = analytic.amax().max(1.0);
        assert!((&analytic - &numeric).amax() <= 1e-5 * scale, "{analytic}\n{numeric}");
    }
}

#[test]
fn equilibria_are_roots_with_zero_speed() {
    for q1 in [1.0, 4.0, 8.0, 10.9] {
        let eq = find_equilibrium(q1, &DEFAULT_GUESS).unwrap();
        assert_eq!(eq.omega, 0.0);
        let f = three_bus_rhs(&eq, q1);
        assert!(f.iter().all(|v| v.abs() <= 1e-8), "{f:?}");
    }
}

#[test]
fn equilibrium_is_a_fixed_point_of_the_simulation() {
    let q1 = 5.0;
    let eq = find_equilibrium(q1, &DEFAULT_GUESS).unwrap();
    let out = simulate(&eq, q1, 10_000, DEFAULT_DT, 0.0, 0).unwrap();
    let last = out.states().row(out.len() - 1);
    for (a, b) in last.iter().zip(eq.to_array()) {
        assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }
}

#[test]
fn simulation_is_seed_deterministic() {
    let eq = find_equilibrium(3.0, &DEFAULT_GUESS).unwrap();
    let one = simulate(&eq, 3.0, 200, 0.05, 1e-3, 9).unwrap();
    let two = simulate(&eq, 3.0, 200, 0.05, 1e-3, 9).unwrap();
    let three = simulate(&eq, 3.0, 200, 0.05, 1e-3, 10).unwrap();
    assert_eq!(one, two);
    assert_ne!(one, three);
    assert_eq!(one.names().unwrap(), &STATE_NAMES.map(String::from)[..]);
    assert!(matches!(simulate(&eq, 3.0, 1, 0.05, 0.0, 0), Err(Error::InvalidArgument(_))));
}

#[test]
fn halving_the_integration_step_converges_at_first_order() {
    let model = ThreeBusModel::default();
    let eq = find_equilibrium(5.0, &DEFAULT_GUESS).unwrap();
    let start = state(eq.to_array().map(|v| v + 0.01));
    let run = |max_step: f64| {
        let cfg = SimulationConfig { dt: 0.05, max_step, noise_sigma: 0.0, seed: 0 };
        simulate_with(&model, &start, 5.0, 40, &cfg).unwrap().states().clone()
    };
    let (coarse, mid, fine) = (run(0.002), run(0.001), run(0.0005));
    let ratio = (&coarse - &mid).amax() / (&mid - &fine).amax();
    assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
    assert!((&mid - &fine).amax() < 1e-3);
}

#[test]
fn continuation_starts_stable_and_voltage_sags() {
    let report = sweep_operating_points(1.0, 10.0, 19).unwrap();
    let points: Vec<_> = report.converged().collect();
    assert_eq!(points.len(), 19);
    assert!(points[0].is_stable());
    assert!(points.windows(2).all(|w| w[1].equilibrium.v < w[0].equilibrium.v));
}

#[test]
fn sweep_finds_hopf_then_fold() {
    let report = sweep_operating_points(1.0, 11.5, 106).unwrap();
    let hopf = report.first(BifurcationKind::Hopf).unwrap();
    assert!(hopf.destabilizing);
    assert!(hopf.upper - hopf.lower <= 1e-4);
    assert!(hopf.frequency.unwrap() > 1e-3);
    let fold = report.first(BifurcationKind::SaddleNode).unwrap();
    assert!(fold.q1() > hopf.q1());
    for b in report.bifurcations.iter().filter(|b| b.kind == BifurcationKind::Hopf) {
        assert!(b.frequency.unwrap() > 1e-3);
    }
}

#[test]
fn discretization_maps_eigenvalues_through_exp() {
    let eq = find_equilibrium(6.0, &DEFAULT_GUESS).unwrap();
    let jac = linearize(&eq, 6.0, 1e-6);
    let dt = 0.01;
    let discrete = discretize(&jac, dt).unwrap();
    let mut expected: Vec<_> = jac.complex_eigenvalues().iter().map(|l| (l * dt).exp()).collect();
    let mut actual: Vec<_> = discrete.complex_eigenvalues().iter().copied().collect();
    let key = |l: &nalgebra::Complex<f64>| (l.re * 1e6).round() as i64 * 1_000_000_000 + (l.im * 1e6).round() as i64;
    expected.sort_by_key(key);
    actual.sort_by_key(key);
    for (e, a) in expected.iter().zip(&actual) {
        assert!((e - a).norm() <= 1e-8, "{e} vs {a}");
    }
    // A stable continuous system maps to a Schur-stable one.
    assert!(LinearSystem::new(discrete, 1.0).unwrap().spectral_radius().unwrap() < 1.0);
}

#[test]
fn participation_reproduces_reference_row() {
    let report = sweep_operating_points(1.0, 11.0, 101).unwrap();
    let hopf = report.first(BifurcationKind::Hopf).unwrap();
    let op = OperatingPoint::new(&ThreeBusModel::default(), hopf.lower, &DEFAULT_GUESS).unwrap();
    let p = participation_factors(&op.jacobian).unwrap();
    let mode = p.mode(p.most_unstable_mode());
    for (got, want) in mode.iter().zip([0.4825, 0.4821, 0.0071, 0.0283]) {
        assert!((got - want).abs() <= 0.02, "{mode:?}");
    }
}

#[test]
fn participation_of_diagonal_is_identity() {
    let p = participation_factors(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0, 0.5]))).unwrap();
    let f = &p.factors;
    // Column order follows the eigenvalue order; each column has one 1.
    for j in 0..3 {
        assert_abs_diff_eq!(f.column(j).sum(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.column(j).amax(), 1.0, epsilon = 1e-12);
    }
    assert!(matches!(participation_factors(&dmatrix![1.0, 1.0; 0.0, 1.0]), Err(Error::DefectiveMatrix(_))));
}

#[test]
fn clusters_load_from_files_and_respect_structure() {
    let dir = std::env::temp_dir().join(format!("infoflow-cluster-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let matrix = dir.join("a.csv");
    let clusters = dir.join("clusters.txt");
    // Block lower-triangular: cluster "up" drives "down", never the reverse.
    std::fs::write(&matrix, "p,q,r,s\n0.5,0.1,0,0\n0.0,0.4,0,0\n0.2,0.1,0.3,0.1\n0.1,0,0,0.6\n").unwrap();
    std::fs::write(&clusters, "# two groups\nup: p,q\ndown: 2,s\n").unwrap();
    let model = load_cluster_model(&matrix, &clusters).unwrap();
    assert_eq!(model.cluster_transfer("down", "up", 1.0, 1e-9).unwrap(), 0.0);
    assert!(model.cluster_transfer("up", "down", 1.0, 1e-9).unwrap() > 0.0);
    let ranked = model.rank_clusters(None, 1.0, 1e-9).unwrap();
    assert_eq!((ranked[0].source.as_str(), ranked[0].target.as_str()), ("up", "down"));
    let zoom = model.zoom("up", "down", 1.0, 1e-9).unwrap();
    assert_eq!(zoom.len(), 2);
    assert!(zoom.windows(2).all(|w| w[0].value >= w[1].value));
    std::fs::write(&clusters, "up: p,q\nup: r\n").unwrap();
    assert!(matches!(load_cluster_model(&matrix, &clusters), Err(Error::NameError(_))));
    std::fs::write(&clusters, "up p,q\n").unwrap();
    assert!(matches!(load_cluster_model(&matrix, &clusters), Err(Error::ParseError { line: 1, .. })));
    std::fs::remove_dir_all(&dir).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn participation_columns_sum_to_one(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = common::rng(seed);
        let a = common::random_with_radius(&mut rng, n, 1.0);
        let p = participation_factors(&a).unwrap();
        for j in 0..n {
            prop_assert!((p.factors.column(j).sum() - 1.0).abs() <= 1e-9);
            prop_assert!(p.factors.column(j).iter().all(|&v| v >= 0.0));
        }
    }
}
