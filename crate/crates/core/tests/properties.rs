use fj_core::abstraction::{
    epsilon_x, one_step_violation, snap, snap_initial, snap_stubbornness, sup_error_bound, AbstractGrid,
};
use fj_core::dynamics::{
    augmented_transition, contraction_factor, hamming, quantize, simulate, BinaryOutput, InfluenceMatrix,
    StubbornnessVector,
};
use fj_core::linalg::{spectral_norm, Matrix};
use fj_core::rational::{from_f64_exact, ratio};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn stochastic_rows(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, n), n).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, mut r)| {
                r[i] += 1e-3;
                let s: f64 = r.iter().sum();
                r.iter().map(|v| v / s).collect()
            })
            .collect()
    })
}

fn instance(max_n: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    (1..=max_n).prop_flat_map(|n| {
        (
            stochastic_rows(n),
            prop::collection::vec(0.0f64..=1.0, n),
            prop::collection::vec(0.0f64..=1.0, n),
        )
    })
}

fn svd_norm(m: &Matrix) -> f64 {
    let rows = m.to_rows();
    let dm = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    dm.singular_values().max()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn opinions_stay_in_unit_interval((w, x, l) in instance(8), horizon in 0usize..20) {
        let w = InfluenceMatrix::from_f64_rows(&w).unwrap();
        let lambda = StubbornnessVector::new(l).unwrap();
        let traj = simulate(&x, &lambda, &w, horizon, 0.5).unwrap();
        for s in &traj.states {
            prop_assert!(s.current.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
            prop_assert_eq!(&s.anchor, &x);
        }
        prop_assert_eq!(traj.outputs.len(), horizon + 1);
    }

    #[test]
    fn augmented_matrix_reproduces_the_step((w, x, l) in instance(6)) {
        let w = InfluenceMatrix::from_f64_rows(&w).unwrap();
        let lambda = StubbornnessVector::new(l).unwrap();
        let traj = simulate(&x, &lambda, &w, 3, 0.5).unwrap();
        let a = augmented_transition(&lambda, &w).unwrap();
        for t in 0..3 {
            let next = a.mul_vec(&traj.states[t].stacked());
            let expect = traj.states[t + 1].stacked();
            for (p, q) in next.iter().zip(&expect) {
                prop_assert!((p - q).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn spectral_norm_matches_svd(rows in (1usize..8, 1usize..8).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop::collection::vec(-3.0f64..3.0, c), r)
    })) {
        let m = Matrix::from_rows(&rows).unwrap();
        let ours = spectral_norm(&m).unwrap();
        let reference = svd_norm(&m);
        prop_assert!((ours - reference).abs() <= 1e-6 * reference.max(1.0), "{ours} vs {reference}");
    }

    #[test]
    fn snapping_error_is_at_most_half_a_cell(
        x in prop::collection::vec(0.0f64..=1.0, 1..10),
        d_x in 1u32..50,
        d_l in 1u32..50,
    ) {
        let idx = snap_initial(&x, d_x).unwrap();
        for (v, &k) in x.iter().zip(&idx) {
            let g = (2 * k + 1) as f64 / (2 * d_x) as f64;
            prop_assert!((v - g).abs() <= 0.5 / d_x as f64 + 1e-15);
        }
        let lambda = StubbornnessVector::new(x.clone()).unwrap();
        let lev = snap_stubbornness(&lambda, d_l).unwrap();
        for (v, &k) in x.iter().zip(&lev) {
            let g = k as f64 / d_l as f64;
            prop_assert!((v - g).abs() <= 0.5 / d_l as f64 + 1e-15);
        }
    }

    /// One-step and uniform bounds for a snapped abstraction sharing `W`.
    #[test]
    fn abstraction_error_bounds((w, x, l) in instance(10), d_x in 1u32..12, d_l in 1u32..12) {
        let l: Vec<f64> = l.iter().map(|v| 0.1 + 0.9 * v).collect();
        let w = InfluenceMatrix::from_f64_rows(&w).unwrap();
        let lambda = StubbornnessVector::new(l).unwrap();
        let grid = AbstractGrid::new(d_x, d_l, w.clone(), 0.0).unwrap();
        let config = snap(&x, &lambda, &grid).unwrap();
        let ab = config.to_model(&grid).unwrap();
        let horizon = 30;
        let traj = simulate(&x, &lambda, &w, horizon, 0.5).unwrap();
        let traj_ab = ab.simulate(horizon, 0.5).unwrap();
        let rho = contraction_factor(&lambda, &w).unwrap();
        let eps = epsilon_x(&w, d_l, d_x, 0.0).unwrap();
        prop_assert_eq!(one_step_violation(&traj, &traj_ab, rho, eps).unwrap(), None);
        let bound = sup_error_bound(rho, eps, x.len()).unwrap();
        for t in 0..=horizon {
            let d: f64 = traj.opinions(t).iter().zip(traj_ab.opinions(t)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(d <= bound + 1e-9);
        }
    }
}

#[test]
fn snapping_midpoints_go_down() {
    // Only values whose binary representation is exactly the boundary count.
    let exact = |v: f64, num: i64, den: i64| from_f64_exact(v).unwrap() == ratio(num, den);
    let mut checked = 0;
    for d in 1u32..64 {
        for k in 1..d {
            let v = k as f64 / d as f64;
            if exact(v, k as i64, d as i64) {
                assert_eq!(snap_initial(&[v], d).unwrap(), vec![k as usize - 1], "boundary {k}/{d}");
                checked += 1;
            }
        }
        for k in 0..d {
            let v = (2 * k + 1) as f64 / (2 * d) as f64;
            if exact(v, 2 * k as i64 + 1, 2 * d as i64) {
                let lambda = StubbornnessVector::new(vec![v]).unwrap();
                assert_eq!(snap_stubbornness(&lambda, d).unwrap(), vec![k as usize], "midpoint {v} at {d}");
                checked += 1;
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn threshold_is_inclusive() {
    assert_eq!(quantize(&[0.5, 0.4999999999, 0.5000000001], 0.5).bits(), &[true, false, true]);
}

#[test]
fn hamming_is_a_metric_on_small_vectors() {
    for n in 1..=4usize {
        let all: Vec<BinaryOutput> = (0..1u32 << n)
            .map(|c| BinaryOutput::new((0..n).map(|i| c >> i & 1 == 1).collect()))
            .collect();
        for a in &all {
            assert_eq!(hamming(a, a).unwrap(), 0.0);
            for b in &all {
                let ab = hamming(a, b).unwrap();
                assert_eq!(ab, hamming(b, a).unwrap());
                assert_eq!(ab == 0.0, a == b);
                assert!((0.0..=1.0).contains(&ab));
                for c in &all {
                    assert!(hamming(a, c).unwrap() <= ab + hamming(b, c).unwrap() + 1e-15);
                }
            }
        }
    }
}
