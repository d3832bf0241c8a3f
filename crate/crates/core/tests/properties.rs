mod common;

use common::{random_system, rel, resolvent_matrix};
use proptest::prelude::*;
use quadrom::acquisition::{self, add_noise, make_burgers_system, NoiseSpec};
use quadrom::dataset::{HarmonicDataset, Provenance};
use quadrom::inference::{self, build_k, build_t2, ls_solve, vectorize_q, FactoredK, LsMode, SolverConfig, ThirdHarmonicRows};
use quadrom::linalg::{kron, kron_vec, singular_values, split_rows, CMatrix, CVector, C64};
use quadrom::loewner::{build_pencil, conjugate_closed_samples, partition_samples, project_and_normalize, realify_pencil, Partition};
use quadrom::simulation::integrate;
use quadrom::system::symmetrize_q;

fn jw(w: f64) -> C64 {
    C64::new(0.0, w)
}

/// Condition number over the singular values that survive the pseudo-inverse
/// floor.
fn retained_condition(m: &CMatrix) -> f64 {
    let real = split_rows(m);
    let sv = singular_values(&real);
    let floor = real.nrows().max(real.ncols()) as f64 * f64::EPSILON * sv[0];
    let smallest = sv.iter().copied().filter(|s| *s > floor).fold(f64::INFINITY, f64::min);
    sv[0] / smallest
}

fn full_condition(m: &CMatrix) -> f64 {
    let sv = singular_values(&split_rows(m));
    let max = sv.iter().copied().fold(0.0, f64::max);
    max / sv.iter().copied().fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn resolvent_identity(seed in any::<u64>(), n in 1usize..=4, w in 0.01f64..100.0, sigma in -0.3f64..0.3) {
        let sys = random_system(seed, n, false);
        let s = C64::new(sigma, w);
        let v = CVector::from_fn(n, |i, _| C64::new(1.0 + i as f64, -0.5 * i as f64));
        let x = sys.resolvent_apply(s, &v).unwrap();
        let back = (sys.e().map(|z| z * s) - sys.a()) * x;
        prop_assert!((back - &v).norm() <= 1e-10 * v.norm());
    }

    #[test]
    fn symmetrization_keeps_quadratic_form(seed in any::<u64>(), n in 1usize..=4, xs in prop::collection::vec(-2.0f64..2.0, 8)) {
        let sys = random_system(seed, n, true);
        let q = CMatrix::from_fn(n, n * n, |i, j| C64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, 0.0)) + sys.q();
        let x = CVector::from_fn(n, |i, _| C64::new(xs[2 * i], xs[2 * i + 1]));
        let xx = kron_vec(&x, &x);
        let d = (&symmetrize_q(&q) * &xx - &q * &xx).norm();
        prop_assert!(d <= 1e-14 * (q.norm() * xx.norm()).max(1.0));
    }

    #[test]
    fn second_harmonic_row_identity(seed in any::<u64>(), n in 1usize..=4, w in 0.05f64..20.0) {
        let sys = random_system(seed, n, false);
        let row = build_t2(&sys, &[jw(w)]).unwrap();
        let vq = vectorize_q(sys.q()).unwrap();
        let lhs = (row * vq.as_vector())[0];
        prop_assert!(rel(lhs, sys.eval_h2(jw(w)).unwrap()) <= 1e-12);
    }

    #[test]
    fn second_state_kernel_identity(seed in any::<u64>(), n in 1usize..=4, w in 0.05f64..20.0) {
        let sys = random_system(seed, n, false);
        let s = jw(w);
        let g1 = CMatrix::from_column_slice(n, 1, sys.eval_g1(s).unwrap().as_slice());
        let phi2 = resolvent_matrix(&sys, s * 2.0);
        let m = kron(&kron(&g1, &g1), &phi2.transpose());
        let vq = vectorize_q(sys.q()).unwrap();
        let lhs = vq.as_vector().transpose() * m;
        let g2 = sys.eval_g2(s).unwrap();
        let err = (lhs.transpose() - &g2).norm();
        prop_assert!(err <= 1e-12 * g2.norm().max(1e-300));
    }

    #[test]
    fn third_harmonic_quadratic_form(seed in any::<u64>(), n in 1usize..=3, w in 0.05f64..20.0) {
        let sys = random_system(seed, n, true);
        let k = build_k(&sys, jw(w)).unwrap();
        let v = vectorize_q(sys.q()).unwrap();
        let val = (v.as_vector().transpose() * k * v.as_vector())[0];
        prop_assert!(rel(val, sys.eval_h3(jw(w)).unwrap()) <= 1e-12);
        let factored = FactoredK::new(&sys, &[jw(w)]).unwrap().rows(&v).unwrap();
        prop_assert!(rel((factored * v.as_vector())[0], val) <= 1e-12);
    }

    #[test]
    fn transfer_functions_decay(seed in any::<u64>(), n in 1usize..=4) {
        let sys = random_system(seed, n, true);
        for m in 1..=3 {
            let lo = sys.eval_h(m, jw(1.0)).unwrap().norm();
            let hi = sys.eval_h(m, jw(1e6)).unwrap().norm();
            prop_assert!(hi <= 1e-4 * lo.max(1e-3), "H{} did not decay: {} vs {}", m, hi, lo);
        }
    }

    #[test]
    fn true_operator_is_a_fixed_point(seed in any::<u64>(), n in 1usize..=2) {
        let sys = random_system(seed, n, true);
        let omegas = acquisition::log_grid(0.1, 10.0, n.pow(3) + 6).unwrap();
        let pts: Vec<C64> = omegas.iter().map(|&w| jw(w)).collect();
        let rows = FactoredK::new(&sys, &pts).unwrap();
        let t2 = rows.t2();
        let v2 = CVector::from_iterator(pts.len(), pts.iter().map(|&s| sys.eval_h2(s).unwrap()));
        let v3 = CVector::from_iterator(pts.len(), pts.iter().map(|&s| sys.eval_h3(s).unwrap()));
        let vstar = vectorize_q(sys.q()).unwrap();
        let t3 = rows.rows(&vstar).unwrap();
        let mut stacked = CMatrix::zeros(2 * pts.len(), t2.ncols());
        stacked.rows_mut(0, pts.len()).copy_from(&t2);
        stacked.rows_mut(pts.len(), pts.len()).copy_from(&t3);
        // unique solution only: full column rank at moderate conditioning
        prop_assume!(full_condition(&stacked) <= 1e5);
        let rhs = CVector::from_iterator(2 * pts.len(), v2.iter().chain(v3.iter()).copied());
        let next = ls_solve(&stacked, &rhs, 0.0, LsMode::RealSplit).unwrap();
        prop_assert!((next - vstar.as_vector()).norm() <= 1e-10 * vstar.as_vector().norm().max(1.0));
    }

    #[test]
    fn zero_third_rows_reduce_to_second_harmonic_solve(seed in any::<u64>(), n in 1usize..=2) {
        let sys = random_system(seed, n, true);
        let pts: Vec<C64> = acquisition::log_grid(0.2, 5.0, 12).unwrap().into_iter().map(jw).collect();
        let t2 = build_t2(&sys, &pts).unwrap();
        let v2 = CVector::from_iterator(pts.len(), pts.iter().map(|&s| sys.eval_h2(s).unwrap()));
        let alone = ls_solve(&t2, &v2, 0.0, LsMode::RealSplit).unwrap();
        let mut stacked = CMatrix::zeros(2 * pts.len(), t2.ncols());
        stacked.rows_mut(0, pts.len()).copy_from(&t2);
        let rhs = CVector::from_iterator(2 * pts.len(), v2.iter().copied().chain(std::iter::repeat_n(C64::new(0.0, 0.0), pts.len())));
        let both = ls_solve(&stacked, &rhs, 0.0, LsMode::RealSplit).unwrap();
        let kappa = retained_condition(&t2);
        prop_assert!((both - &alone).norm() <= 1e-14 * kappa * alone.norm());
    }

    #[test]
    fn trace_matches_convergence_flag(seed in any::<u64>(), tau_exp in 2i32..12, max_iter in 1usize..40) {
        let sys = random_system(seed, 2, true);
        let pts: Vec<C64> = acquisition::log_grid(0.1, 10.0, 14).unwrap().into_iter().map(jw).collect();
        let rows = FactoredK::new(&sys, &pts).unwrap();
        let v2 = CVector::from_iterator(pts.len(), pts.iter().map(|&s| sys.eval_h2(s).unwrap()));
        let v3 = CVector::from_iterator(pts.len(), pts.iter().map(|&s| sys.eval_h3(s).unwrap()));
        let cfg = SolverConfig { tau: 10f64.powi(-tau_exp), epsilon: 0.0, max_iter };
        let fit = inference::run_algorithm1(&rows.t2(), &rows, &v2, &v3, &cfg, LsMode::RealSplit).unwrap();
        prop_assert_eq!(fit.deviation_trace.len(), fit.iterations);
        prop_assert!(fit.iterations <= max_iter);
        if fit.converged {
            prop_assert!(fit.final_deviation() <= cfg.tau);
        } else {
            prop_assert_eq!(fit.iterations, max_iter);
            prop_assert!(fit.deviation_trace.iter().all(|d| *d > cfg.tau));
        }
    }

    #[test]
    fn pencil_entrywise_identities(seed in any::<u64>(), n in 1usize..=4) {
        let sys = random_system(seed, n, true);
        let omegas = acquisition::log_grid(0.1, 10.0, 2 * n + 2).unwrap();
        let h: Vec<C64> = omegas.iter().map(|&w| sys.eval_h1(jw(w)).unwrap()).collect();
        let (pts, vals) = conjugate_closed_samples(&omegas, &h);
        let (data, _) = partition_samples(&pts, &vals, Partition::Interleaved).unwrap();
        let p = build_pencil(&data).unwrap();
        for (i, &(mu, v)) in data.left().iter().enumerate() {
            for (j, &(lam, w)) in data.right().iter().enumerate() {
                let d = mu - lam;
                prop_assert!(rel(p.l[(i, j)] * d, v - w) <= 1e-14 || (v - w).norm() < 1e-300);
                prop_assert!(rel(p.ls[(i, j)] * d, mu * v - lam * w) <= 1e-14);
            }
        }
    }

    #[test]
    fn loewner_interpolates_and_realification_is_transparent(seed in any::<u64>(), n in 1usize..=4) {
        let sys = random_system(seed, n, true);
        let omegas = acquisition::log_grid(0.1, 10.0, 2 * n + 2).unwrap();
        let h: Vec<C64> = omegas.iter().map(|&w| sys.eval_h1(jw(w)).unwrap()).collect();
        let (pts, vals) = conjugate_closed_samples(&omegas, &h);
        let (data, _) = partition_samples(&pts, &vals, Partition::Interleaved).unwrap();
        let complex = build_pencil(&data).unwrap();
        let real = realify_pencil(&complex).unwrap();

        let sv_c = singular_values(&complex.l.clone().insert_columns(complex.l.ncols(), 0, C64::new(0.0, 0.0)));
        let sv_r = singular_values(&real.l.map(|z| z.re));
        for (a, b) in sv_c.iter().zip(&sv_r) {
            prop_assert!((a - b).abs() <= 1e-12 * sv_c[0]);
        }

        let mc = project_and_normalize(&complex, n).unwrap();
        let mr = project_and_normalize(&real, n).unwrap();
        for &(s, v) in data.left().iter().chain(data.right()) {
            prop_assert!(rel(mc.eval_h1(s).unwrap(), v) <= 1e-8);
            prop_assert!(rel(mr.eval_h1(s).unwrap(), v) <= 1e-8);
        }
        for w in [0.05, 0.7, 3.3, 40.0] {
            prop_assert!(rel(mr.eval_h1(jw(w)).unwrap(), mc.eval_h1(jw(w)).unwrap()) <= 1e-10);
        }
    }

    #[test]
    fn noise_is_deterministic(seed in any::<u64>(), snr in 10.0f64..80.0) {
        let omegas: Vec<f64> = (1..=32).map(|k| k as f64).collect();
        let vals: Vec<C64> = omegas.iter().map(|w| C64::from_polar(1.0 / w, *w)).collect();
        let ds = HarmonicDataset::new(omegas, [Some(vals.clone()), Some(vals.clone()), None], Provenance::Direct).unwrap();
        let spec = NoiseSpec { snr_db: snr, seed };
        let a = add_noise(&ds, &spec);
        let b = add_noise(&ds, &spec);
        prop_assert_eq!(&a, &b);
        prop_assert!(a.levels[2].is_none());
    }

    #[test]
    fn zero_input_zero_state_stays_at_rest(seed in any::<u64>(), n in 1usize..=4) {
        let sys = random_system(seed, n, false);
        let y = integrate(&sys, &|_| C64::new(0.0, 0.0), &CVector::zeros(n), (0.0, 1.0), 0.01).unwrap();
        prop_assert!(y.values.iter().all(|v| v.norm() == 0.0));
    }
}

#[test]
fn burgers_small_signals_follow_the_linearization() {
    let sys = make_burgers_system(20, 0.05, 1.0).unwrap();
    let lin = sys.linear_part();
    let deviation = |amp: f64| {
        let u = move |t: f64| C64::new(amp * (2.0 * t).sin(), 0.0);
        let x0 = CVector::zeros(20);
        let yf = integrate(&sys, &u, &x0, (0.0, 2.0), 1e-3).unwrap();
        let yl = integrate(&lin, &u, &x0, (0.0, 2.0), 1e-3).unwrap();
        let num: f64 = yf.values.iter().zip(&yl.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = yl.values.iter().map(|b| b.norm_sqr()).sum();
        (num / den).sqrt()
    };
    let (d1, d2) = (deviation(1e-2), deviation(5e-3));
    assert!(d1 < 1e-2, "relative deviation {d1}");
    let ratio = d1 / d2;
    assert!((1.8..2.2).contains(&ratio), "deviation should scale linearly, ratio {ratio}");
}

#[test]
fn fixed_point_holds_for_small_normed_rows() {
    let n = 2;
    let sys = random_system(11960771793049774158, n, true);
    let pts: Vec<C64> = acquisition::log_grid(0.1, 10.0, n.pow(3) + 6).unwrap().into_iter().map(jw).collect();
    let rows = FactoredK::new(&sys, &pts).unwrap();
    let vstar = vectorize_q(sys.q()).unwrap();
    let t3 = rows.rows(&vstar).unwrap();
    let mut stacked = CMatrix::zeros(2 * pts.len(), t3.ncols());
    stacked.rows_mut(0, pts.len()).copy_from(&rows.t2());
    stacked.rows_mut(pts.len(), pts.len()).copy_from(&t3);
    let rhs = CVector::from_iterator(
        2 * pts.len(),
        pts.iter().map(|&s| sys.eval_h2(s).unwrap()).chain(pts.iter().map(|&s| sys.eval_h3(s).unwrap())),
    );
    let next = ls_solve(&stacked, &rhs, 0.0, LsMode::RealSplit).unwrap();
    assert!((next - vstar.as_vector()).norm() <= 1e-10 * vstar.as_vector().norm());
}
