mod common;

use common::*;
use gpasc::asc::{log_eta_bayesian, log_eta_beta_noise};
use gpasc::gaussian::log_product_integral;
use gpasc::gp::{log_evidence, loo_cv_objective};
use gpasc::harness::{rank_scores, standardization};
use gpasc::kernels::{kernel_matrix, KernelStructure};
use gpasc::{Dataset, GaussianDist, GpModel, KernelSpec, Matrix, Partition, Result};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn cfg() -> ProptestConfig {
    ProptestConfig { cases: 48, ..ProptestConfig::default() }
}

fn permuted(data: &Dataset, perm: &[usize]) -> Dataset {
    data.subset(perm)
}

fn close_or_both_err(a: &Result<f64>, b: &Result<f64>, tol: f64) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => (x - y).abs() <= tol * x.abs().max(1.0),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn gram_matrices_are_symmetric_psd(seed in any::<u64>(), n in 2usize..16, dim in 1usize..3) {
        let mut r = rng(seed);
        let k = random_kernel(&mut r, dim);
        let data = random_dataset(&mut r, n, dim);
        let g = kernel_matrix(&k, data.x(), data.x()).unwrap();
        prop_assert_eq!(g.max_abs_asymmetry(), 0.0);
        let eig = DMatrix::from_fn(n, n, |i, j| g[(i, j)]).symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(min >= -1e-10 * g.trace(), "min eigenvalue {min}");
    }

    #[test]
    fn kernels_are_stationary(seed in any::<u64>(), shift in -10.0f64..10.0) {
        let mut r = rng(seed);
        let k = random_kernel(&mut r, 1);
        let (a, b) = (r.random_range(-3.0..3.0), r.random_range(-3.0..3.0));
        let base = k.eval(&[a], &[b]);
        let moved = k.eval(&[a + shift], &[b + shift]);
        prop_assert!((base - moved).abs() <= 1e-12 * base.abs().max(1e-300) + 1e-15);
        prop_assert!((k.eval(&[a], &[a]) - k.prior_variance()).abs() <= 1e-12 * k.prior_variance());
    }

    #[test]
    fn signal_scale_multiplies_kernel(seed in any::<u64>(), s in 0.1f64..10.0) {
        let mut r = rng(seed);
        let k = random_kernel(&mut r, 1);
        let mut theta = k.theta();
        let sf_slot = match k.structure() {
            KernelStructure::Periodic => 2,
            _ => 1,
        };
        theta[sf_slot] += s.ln();
        let scaled = k.with_theta(&theta).unwrap();
        let (a, b) = (r.random_range(0.0..5.0), r.random_range(0.0..5.0));
        let lhs = scaled.eval(&[a], &[b]);
        let rhs = s * s * k.eval(&[a], &[b]);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
    }

    #[test]
    fn evidence_and_loo_ignore_point_order(seed in any::<u64>(), n in 3usize..20) {
        let mut r = rng(seed);
        let dim = r.random_range(1..3);
        let model = GpModel::new(random_kernel(&mut r, dim));
        let data = random_dataset(&mut r, n, dim);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let shuffled = permuted(&data, &perm);
        let (e1, e2) = (log_evidence(&model, &data).unwrap(), log_evidence(&model, &shuffled).unwrap());
        prop_assert!((e1 - e2).abs() <= 1e-10 * e1.abs().max(1.0));
        let (l1, l2) = (loo_cv_objective(&model, &data).unwrap(), loo_cv_objective(&model, &shuffled).unwrap());
        prop_assert!((l1 - l2).abs() <= 1e-10 * l1.abs().max(1.0));
    }

    #[test]
    fn agreement_is_symmetric_in_the_halves(seed in any::<u64>(), n in 4usize..14, m in 1usize..3) {
        prop_assume!(n > 2 * m);
        let mut r = rng(seed);
        let model = GpModel::new(random_kernel_of(&mut r, KernelStructure::SquaredExponential));
        let data = random_dataset(&mut r, n, 1);
        let part = random_partition(&mut r, n, m);
        let swapped = part.swapped();
        prop_assert!(close_or_both_err(&log_eta_bayesian(&model, &data, &part), &log_eta_bayesian(&model, &data, &swapped), 1e-9));
        prop_assert!(close_or_both_err(&log_eta_beta_noise(&model, &data, &part), &log_eta_beta_noise(&model, &data, &swapped), 1e-9));
    }

    #[test]
    fn agreement_ignores_order_within_halves(seed in any::<u64>(), n in 4usize..14, m in 1usize..3) {
        prop_assume!(n >= 2 * m);
        let mut r = rng(seed);
        let model = GpModel::new(random_kernel(&mut r, 1));
        let data = random_dataset(&mut r, n, 1);
        let part = random_partition(&mut r, n, m);
        let mut shuffled = part.clone();
        shuffled.idx1.shuffle(&mut r);
        shuffled.idx2.shuffle(&mut r);
        shuffled.anchor_idx.shuffle(&mut r);
        prop_assert!(close_or_both_err(&log_eta_bayesian(&model, &data, &part), &log_eta_bayesian(&model, &data, &shuffled), 1e-9));
        prop_assert!(close_or_both_err(&log_eta_beta_noise(&model, &data, &part), &log_eta_beta_noise(&model, &data, &shuffled), 1e-9));
    }

    #[test]
    fn agreement_ignores_dataset_relabeling(seed in any::<u64>(), n in 4usize..12) {
        let mut r = rng(seed);
        let model = GpModel::new(random_kernel_of(&mut r, KernelStructure::RationalQuadratic));
        let data = random_dataset(&mut r, n, 1);
        let part = random_partition(&mut r, n, 1);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let relabel = |v: &[usize]| v.iter().map(|&i| inv[i]).collect::<Vec<_>>();
        let moved = Partition { idx1: relabel(&part.idx1), idx2: relabel(&part.idx2), anchor_idx: relabel(&part.anchor_idx) };
        let shuffled = permuted(&data, &perm);
        prop_assert!(close_or_both_err(&log_eta_bayesian(&model, &data, &part), &log_eta_bayesian(&model, &shuffled, &moved), 1e-9));
    }

    #[test]
    fn product_integral_is_associative(seed in any::<u64>(), d in 1usize..4) {
        let mut r = rng(seed);
        let comps: Vec<GaussianDist> = (0..3)
            .map(|_| GaussianDist::new(random_vec(&mut r, d, 2.0), from_na(&random_spd(&mut r, d))).unwrap())
            .collect();
        let (all, _) = log_product_integral(&comps).unwrap();
        let (ab, prod_ab) = log_product_integral(&comps[..2]).unwrap();
        let (rest, _) = log_product_integral(&[prod_ab, comps[2].clone()]).unwrap();
        prop_assert!((all - (ab + rest)).abs() <= 1e-10 * all.abs().max(1.0));
    }

    #[test]
    fn ranks_survive_monotone_transforms(values in prop::collection::vec(prop::option::weighted(0.85, -50.0f64..50.0), 1..10)) {
        let shifted: Vec<Option<f64>> = values.iter().map(|v| v.map(|x| 3.0 * x + 1.0)).collect();
        let squashed: Vec<Option<f64>> = values.iter().map(|v| v.map(|x| x.atan())).collect();
        let base = rank_scores(&values, true);
        prop_assert_eq!(&base, &rank_scores(&shifted, true));
        prop_assert_eq!(&base, &rank_scores(&squashed, true));
        let negated: Vec<Option<f64>> = values.iter().map(|v| v.map(|x| -x)).collect();
        prop_assert_eq!(&base, &rank_scores(&negated, false));
        let n = values.len() as f64;
        prop_assert!((base.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn standardization_round_trips(seed in any::<u64>(), n in 1usize..30, dim in 1usize..5) {
        let mut r = rng(seed);
        let x = Matrix::from_fn(dim, n, |d, _| r.random_range(-1e3..1e3) * (d as f64 + 1.0));
        let t = standardization(&x);
        let back = t.invert(&t.apply(&x));
        for d in 0..dim {
            for i in 0..n {
                prop_assert!((back[(d, i)] - x[(d, i)]).abs() <= 1e-12 * x[(d, i)].abs().max(1.0));
            }
        }
    }
}

#[test]
fn periodic_kernel_is_psd_in_one_dimension() {
    let mut r = rng(404);
    for _ in 0..30 {
        let k = random_kernel_of(&mut r, KernelStructure::Periodic);
        let data = random_dataset(&mut r, 25, 1);
        let g = kernel_matrix(&k, data.x(), data.x()).unwrap();
        let min = to_na(&g).symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-10 * g.trace());
    }
}

#[test]
fn f32_instantiation_agrees_with_f64() {
    let k64 = KernelSpec::squared_exponential(1.3, 0.8, 0.2).unwrap();
    let k32 = gpasc::kernels::KernelSpec::<f32>::squared_exponential(1.3, 0.8, 0.2).unwrap();
    let xs = [0.1, 0.7, 1.9, 2.4, 3.3];
    let ys = [0.3, -0.2, 0.9, 0.5, -0.4];
    let d64 = Dataset::from_1d(&xs, &ys).unwrap();
    let d32 = gpasc::gp::Dataset::<f32>::from_1d(&xs.map(|v| v as f32), &ys.map(|v| v as f32)).unwrap();
    let e64 = log_evidence(&GpModel::new(k64), &d64).unwrap();
    let e32 = log_evidence(&gpasc::gp::GpModel::new(k32), &d32).unwrap();
    assert!((e64 - e32 as f64).abs() < 1e-4 * e64.abs().max(1.0), "{e64} vs {e32}");
}
