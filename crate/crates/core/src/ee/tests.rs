use super::*;
use approx::assert_relative_eq;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn balanced_logistic_chunk() -> (Matrix, Vec<f64>) {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..10 {
        for (x2, resp) in [(1.0, 1.0), (1.0, 0.0), (-1.0, 1.0), (-1.0, 0.0)] {
            rows.push(vec![1.0, x2]);
            y.push(resp);
        }
    }
    (Matrix::from_rows(&rows).unwrap(), y)
}

fn random_logistic_chunk(
    n: usize,
    beta: &[f64],
    rng: &mut StdRng,
) -> (Matrix, Vec<f64>) {
    let p = beta.len();
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = vec![1.0];
        row.extend((1..p).map(|_| rng.gen_range(-1.0..1.0)));
        let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
        let mu = 1.0 / (1.0 + (-eta).exp());
        y.push(f64::from(rng.gen_bool(mu)));
        rows.push(row);
    }
    (Matrix::from_rows(&rows).unwrap(), y)
}

#[test]
fn symmetric_balanced_design_fits_zero() {
    let (x, y) = balanced_logistic_chunk();
    let cfg = IrlsConfig::for_family(&EeFamily::Logistic);
    let fit = irls_solve(&x, &y, &EeFamily::Logistic, &[0.0, 0.0], &cfg).unwrap();
    assert!(fit.converged);
    assert!(fit.beta_sub[0].abs() < 1e-10);
    assert!(fit.beta_sub[1].abs() < 1e-10);
    assert!(!fit.separated);
}

#[test]
fn linear_family_reduces_to_least_squares() {
    let x = Matrix::from_rows(&[
        vec![1.0, 0.5],
        vec![1.0, -1.0],
        vec![1.0, 2.0],
        vec![1.0, 0.0],
    ])
    .unwrap();
    let y = [1.0, -0.5, 3.0, 0.7];
    let beta = [0.3, -0.2];
    let se = score_eval(&x, &y, &EeFamily::Quasi(LinkFn::Identity), &beta).unwrap();
    // m = X'(y - X beta), A = X'X exactly
    let resid: Vec<f64> = (0..4)
        .map(|i| y[i] - dot(x.row(i), &beta))
        .collect();
    let expect_m = x.tr_matvec(&resid);
    for (a, b) in se.m_vec.iter().zip(&expect_m) {
        assert_relative_eq!(a, b, max_relative = 1e-14);
    }
    assert!(se.a_mat.sub(&x.gram()).frobenius_norm() < 1e-14);
}

#[test]
fn score_vanishes_at_irls_solution() {
    let mut rng = StdRng::seed_from_u64(5);
    let (x, y) = random_logistic_chunk(200, &[0.4, -0.8, 0.6], &mut rng);
    let cfg = IrlsConfig::for_family(&EeFamily::Logistic);
    let fit = irls_solve(&x, &y, &EeFamily::Logistic, &[0.0; 3], &cfg).unwrap();
    assert!(fit.converged);
    let se = score_eval(&x, &y, &EeFamily::Logistic, &fit.beta_sub).unwrap();
    let norm = se.m_vec.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    assert!(norm < 1e-6 * x.rows() as f64, "score norm {norm}");
}

#[test]
fn jacobian_matches_finite_differences_logistic() {
    let mut rng = StdRng::seed_from_u64(9);
    let (x, y) = random_logistic_chunk(60, &[0.2, 0.5, -0.4], &mut rng);
    let beta = [0.1, -0.3, 0.2];
    let se = score_eval(&x, &y, &EeFamily::Logistic, &beta).unwrap();
    let h = 1e-6;
    for j in 0..3 {
        let mut up = beta;
        up[j] += h;
        let mut dn = beta;
        dn[j] -= h;
        let mu = score_eval(&x, &y, &EeFamily::Logistic, &up).unwrap();
        let md = score_eval(&x, &y, &EeFamily::Logistic, &dn).unwrap();
        for i in 0..3 {
            let fd = -(mu.m_vec[i] - md.m_vec[i]) / (2.0 * h);
            assert_relative_eq!(fd, se.a_mat.get(i, j), max_relative = 1e-4, epsilon = 1e-6);
        }
    }
}

#[test]
fn rank_deficient_chunk_has_unique_linear_predictor() {
    let mut rng = StdRng::seed_from_u64(13);
    // third column identically zero inside the chunk
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..120 {
        let row = vec![1.0, rng.gen_range(-1.0..1.0), 0.0];
        let eta = 0.5 * row[0] + 0.8 * row[1];
        let mu = 1.0 / (1.0 + (-eta as f64).exp());
        y.push(f64::from(rng.gen_bool(mu)));
        rows.push(row);
    }
    let x = Matrix::from_rows(&rows).unwrap();
    let mut cfg = IrlsConfig::for_family(&EeFamily::Logistic);
    cfg.ginv = GinvKind::MoorePenrose;
    let fit_mp = irls_solve(&x, &y, &EeFamily::Logistic, &[0.0; 3], &cfg).unwrap();
    cfg.ginv = GinvKind::Rao;
    let fit_rao = irls_solve(&x, &y, &EeFamily::Logistic, &[0.0; 3], &cfg).unwrap();
    assert_eq!(fit_mp.rank, 2);
    assert_eq!(fit_rao.rank, 2);
    let eta_mp = x.matvec(&fit_mp.beta_sub);
    let eta_rao = x.matvec(&fit_rao.beta_sub);
    for (a, b) in eta_mp.iter().zip(&eta_rao) {
        assert_relative_eq!(a, b, max_relative = 1e-8, epsilon = 1e-8);
    }
}

#[test]
fn complete_separation_is_flagged() {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..40 {
        let x2 = if i % 2 == 0 { 1.0 } else { -1.0 };
        rows.push(vec![1.0, x2]);
        y.push(if x2 > 0.0 { 1.0 } else { 0.0 });
    }
    let x = Matrix::from_rows(&rows).unwrap();
    let cfg = IrlsConfig::for_family(&EeFamily::Logistic);
    let fit = irls_solve(&x, &y, &EeFamily::Logistic, &[0.0, 0.0], &cfg).unwrap();
    assert!(fit.separated);
}

#[test]
fn nonconverged_fit_is_returned_with_flag() {
    let mut rng = StdRng::seed_from_u64(17);
    let (x, y) = random_logistic_chunk(100, &[0.5, 1.0], &mut rng);
    let cfg = IrlsConfig {
        max_iter: 1,
        ..IrlsConfig::for_family(&EeFamily::Logistic)
    };
    let fit = irls_solve(&x, &y, &EeFamily::Logistic, &[0.0, 0.0], &cfg).unwrap();
    assert!(!fit.converged);
    assert_eq!(fit.iterations, 1);
}

#[test]
fn first_cee_update_is_the_subset_fit() {
    let mut rng = StdRng::seed_from_u64(23);
    let (x, y) = random_logistic_chunk(150, &[0.3, -0.5], &mut rng);
    let cfg = IrlsConfig::for_family(&EeFamily::Logistic);
    let fit = irls_solve(&x, &y, &EeFamily::Logistic, &[0.0, 0.0], &cfg).unwrap();
    let mut state = CeeState::new(2, cfg.variance);
    assert_eq!(
        state.update(&fit, &x, &y, &EeFamily::Logistic).unwrap(),
        EeUpdateOutcome::Updated
    );
    for (a, b) in state.beta().unwrap().iter().zip(&fit.beta_sub) {
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }
    // model-based variance at k = 1 equals the subset variance
    assert!(state.v().unwrap().sub(&fit.v_sub).frobenius_norm() < 1e-10);
}

#[test]
fn first_cuee_update_is_the_subset_fit() {
    let mut rng = StdRng::seed_from_u64(29);
    let (x, y) = random_logistic_chunk(150, &[0.3, -0.5], &mut rng);
    let cfg = IrlsConfig::for_family(&EeFamily::Logistic);
    let mut state = CueeState::new(2, cfg.variance);
    let rec = state.update(&x, &y, &EeFamily::Logistic, &cfg).unwrap();
    for (a, b) in state.beta_tilde().unwrap().iter().zip(&rec.fit.beta_sub) {
        assert_relative_eq!(a, b, max_relative = 1e-8);
    }
    // the intermediary estimator coincides with the subset fit at k = 1
    for (a, b) in rec.beta_check.iter().zip(&rec.fit.beta_sub) {
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }
    let m_norm = rec.m_check.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    assert!(m_norm < 1e-6 * x.rows() as f64);
}

#[test]
fn wald_identities() {
    let beta = vec![0.8, -0.2, 0.0];
    let v = Matrix::from_vec(
        3,
        3,
        vec![0.04, 0.01, 0.0, 0.01, 0.09, 0.0, 0.0, 0.0, 0.25],
    )
    .unwrap();
    // single-coefficient contrast: w = z^2
    let c = Matrix::from_vec(1, 3, vec![0.0, 1.0, 0.0]).unwrap();
    let w = wald_global(&beta, &v, &c).unwrap();
    let zs = wald_coefs(&beta, &v);
    assert_relative_eq!(w.w, zs[1].z * zs[1].z, max_relative = 1e-12);
    // contrast annihilating the estimate: w = 0, p = 1
    let c0 = Matrix::from_vec(1, 3, vec![0.2, 0.8, 0.0]).unwrap();
    let beta0 = vec![0.8, -0.2, 0.3];
    let cv = c0.matvec(&beta0);
    assert!(cv[0].abs() < 1e-15);
    let w0 = wald_global(&beta0, &v, &c0).unwrap();
    assert!(w0.w < 1e-25);
    assert_eq!(w0.p_value, 1.0);
    // rank-deficient contrast is rejected
    let bad = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]]).unwrap();
    assert!(matches!(
        wald_global(&beta, &v, &bad),
        Err(Error::RankDeficientContrast)
    ));
}

#[test]
fn deferred_cee_recovers_once_invertible() {
    let mut rng = StdRng::seed_from_u64(31);
    // first chunk missing all variation in column 3
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..80 {
        let row = vec![1.0, rng.gen_range(-1.0..1.0), 0.0];
        let eta = 0.4 * row[1];
        let mu = 1.0 / (1.0 + (-eta as f64).exp());
        y.push(f64::from(rng.gen_bool(mu)));
        rows.push(row);
    }
    let x1 = Matrix::from_rows(&rows).unwrap();
    let (x2, y2) = random_logistic_chunk(120, &[0.2, 0.4, -0.6], &mut rng);
    let fam = EeFamily::Logistic;
    let cfg = IrlsConfig::for_family(&fam);
    let mut state = CeeState::new(3, cfg.variance);
    let f1 = irls_solve(&x1, &y, &fam, &[0.0; 3], &cfg).unwrap();
    assert_eq!(
        state.update(&f1, &x1, &y, &fam).unwrap(),
        EeUpdateOutcome::Deferred
    );
    assert!(state.is_deferred());
    assert!(state.beta().is_none());
    let f2 = irls_solve(&x2, &y2, &fam, &[0.0; 3], &cfg).unwrap();
    assert_eq!(
        state.update(&f2, &x2, &y2, &fam).unwrap(),
        EeUpdateOutcome::Updated
    );
    // equals the one-shot aggregated combination of the two subset fits
    let a_sum = f1.a_mat.add(&f2.a_mat);
    let mut rhs = f1.a_mat.matvec(&f1.beta_sub);
    for (r, v) in rhs.iter_mut().zip(f2.a_mat.matvec(&f2.beta_sub)) {
        *r += v;
    }
    let expect = SpdFactor::new(&a_sum).unwrap().solve_vec(&rhs);
    for (a, b) in state.beta().unwrap().iter().zip(&expect) {
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }
}
