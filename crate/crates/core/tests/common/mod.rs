#![allow(dead_code)]

use nalgebra::DMatrix;
use quadrom::linalg::{CMatrix, CVector, C64};
use quadrom::system::symmetrize_q;
use quadrom::QuadraticSystem;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gauss(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Random real system of order `n` with a stable `A`, symmetric `Q`, and a
/// well-conditioned `E` (identity when `identity_e`).
pub fn random_system(seed: u64, n: usize, identity_e: bool) -> QuadraticSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = gauss(&mut rng, n, n);
    let shift = r.norm() + 0.5;
    let a = &r - DMatrix::identity(n, n) * shift;
    let e = if identity_e { DMatrix::identity(n, n) } else { DMatrix::identity(n, n) + gauss(&mut rng, n, n) * 0.1 };
    let q = gauss(&mut rng, n, n * n);
    let b: Vec<f64> = gauss(&mut rng, n, 1).iter().copied().collect();
    let c: Vec<f64> = gauss(&mut rng, n, 1).iter().copied().collect();
    let sys = QuadraticSystem::from_real(&e, &a, &q, &b, &c).unwrap();
    let qs = symmetrize_q(sys.q());
    sys.with_q(qs).unwrap().with_symmetric(true).unwrap()
}

/// Explicit `(sE - A)^{-1}`, only for checking identities.
pub fn resolvent_matrix(sys: &QuadraticSystem, s: C64) -> CMatrix {
    let n = sys.n();
    let mut out = CMatrix::zeros(n, n);
    for k in 0..n {
        let mut e = CVector::zeros(n);
        e[k] = C64::new(1.0, 0.0);
        out.set_column(k, &sys.resolvent_apply(s, &e).unwrap());
    }
    out
}

pub fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}
