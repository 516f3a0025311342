mod common;

use common::taylor_exp;
use multiphoton::hilbert::{
    bipartitions, evolve, evolve_with, schmidt_spectrum, unitary, ExpMethod, LinearMap, StateVector, SubsystemLayout,
};
use multiphoton::C64;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn hermitian(dim: usize, entries: &[(f64, f64)]) -> DMatrix<C64> {
    let mut m = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    let mut it = entries.iter().cycle();
    for i in 0..dim {
        for j in i..dim {
            let &(re, im) = it.next().unwrap();
            if i == j {
                m[(i, i)] = C64::new(re, 0.0);
            } else {
                m[(i, j)] = C64::new(re, im);
                m[(j, i)] = C64::new(re, -im);
            }
        }
    }
    m
}

fn random_state(dim: usize, entries: &[(f64, f64)]) -> Vec<C64> {
    let v: Vec<C64> = entries.iter().cycle().take(dim).map(|&(a, b)| C64::new(a, b + 0.1)).collect();
    let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn entries(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn propagator_is_unitary(dim in 2usize..=64, e in entries(300), t in 0.0f64..5.0) {
        let layout = SubsystemLayout::single(dim, "s").unwrap();
        let h = LinearMap::dense(hermitian(dim, &e), layout.clone()).unwrap();
        let u = unitary(&h, t).unwrap();
        let psi = random_state(dim, &e[7..]);
        let v = &u * nalgebra::DVector::from_column_slice(&psi);
        prop_assert!((v.norm() - 1.0).abs() < 1e-9);
        let out = evolve(&StateVector::new(psi, layout).unwrap(), &h, t).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn evolution_composes(dim in 2usize..=32, e in entries(200), t1 in 0.0f64..3.0, t2 in 0.0f64..3.0) {
        let layout = SubsystemLayout::single(dim, "s").unwrap();
        let h = LinearMap::dense(hermitian(dim, &e), layout.clone()).unwrap();
        let psi = StateVector::new(random_state(dim, &e[3..]), layout).unwrap();
        let two = evolve(&evolve(&psi, &h, t1).unwrap(), &h, t2).unwrap();
        let one = evolve(&psi, &h, t1 + t2).unwrap();
        prop_assert!(two.distance(&one).unwrap() < 1e-8);
    }

    #[test]
    fn matches_series_exponential(dim in 2usize..=16, e in entries(136), t in 0.0f64..4.0) {
        let layout = SubsystemLayout::single(dim, "s").unwrap();
        let m = hermitian(dim, &e);
        let h = LinearMap::dense(m.clone(), layout.clone()).unwrap();
        let u = unitary(&h, t).unwrap();
        prop_assert!(max_abs(&(&u - taylor_exp(&m, t))) < 1e-10);
        let psi = StateVector::new(random_state(dim, &e[5..]), layout).unwrap();
        let a = evolve_with(&psi, &h, t, ExpMethod::Eigen).unwrap();
        let b = evolve_with(&psi, &h, t, ExpMethod::Taylor).unwrap();
        prop_assert!(a.distance(&b).unwrap() < 1e-10);
    }

    #[test]
    fn schmidt_weights_sum_to_one(n in 2usize..=6, e in entries(64)) {
        let layout = SubsystemLayout::qubits(n);
        let psi = StateVector::new(random_state(1 << n, &e), layout).unwrap();
        for part in bipartitions(n) {
            let s = schmidt_spectrum(&psi, &part).unwrap();
            let total: f64 = s.iter().map(|x| x * x).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn diagonal_fast_path_matches_dense() {
    let layout = SubsystemLayout::qubits(3);
    let diag: Vec<C64> = (0..8).map(|i| C64::new(0.3 * i as f64 - 1.0, 0.0)).collect();
    let d = LinearMap::diagonal(diag.clone(), layout.clone()).unwrap();
    let dense = LinearMap::dense(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)), layout.clone()).unwrap();
    let psi = StateVector::ghz(3).with_layout(layout).unwrap();
    let a = evolve(&psi, &d, 1.7).unwrap();
    let b = evolve_with(&psi, &dense, 1.7, ExpMethod::Eigen).unwrap();
    assert!(a.distance(&b).unwrap() < 1e-12);
}
