//! Cumulative estimating-equation estimators against one-shot combinations,
//! batch fits, and an independent Newton solver.

mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::SeedableRng;
use streamstat_core::ee::{
    irls_solve, CeeState, CueeState, EeFamily, IrlsConfig, LinkFn, VarianceKind,
};
use streamstat_core::numkern::Matrix;
use streamstat_core::sim::{gen_design, gen_response, replicate_rng, CovariateKind};

fn logistic_design(p: usize) -> Vec<CovariateKind> {
    let mut spec = vec![CovariateKind::Intercept];
    for j in 1..p {
        spec.push(if j % 2 == 0 {
            CovariateKind::Normal
        } else {
            CovariateKind::Bernoulli(0.5)
        });
    }
    spec
}

/// Independent oracle: damped Newton iteration on the score with a central
/// finite-difference Jacobian, all in nalgebra. Shares no code path with the
/// IRLS implementation under test.
fn newton_oracle(
    x: &Matrix,
    y: &[f64],
    mean: impl Fn(f64) -> f64 + Copy,
    p: usize,
) -> Vec<f64> {
    let score = |beta: &DVector<f64>| -> DVector<f64> {
        let mut m = DVector::zeros(p);
        for i in 0..x.rows() {
            let eta: f64 = x.row(i).iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            let r = y[i] - mean(eta);
            for j in 0..p {
                m[j] += x.get(i, j) * r;
            }
        }
        m
    };
    let mut beta = DVector::zeros(p);
    for _ in 0..200 {
        let m = score(&beta);
        if m.amax() < 1e-12 * x.rows() as f64 {
            break;
        }
        let h = 1e-6;
        let mut jac = DMatrix::zeros(p, p);
        for j in 0..p {
            let mut up = beta.clone();
            up[j] += h;
            let mut dn = beta.clone();
            dn[j] -= h;
            let diff = (score(&up) - score(&dn)) / (2.0 * h);
            for i in 0..p {
                jac[(i, j)] = -diff[i];
            }
        }
        let step = jac.lu().solve(&m).expect("oracle jacobian invertible");
        beta += step;
    }
    beta.iter().copied().collect()
}

#[test]
fn irls_agrees_with_independent_newton_solver() {
    let mut rng = replicate_rng(71, 0);
    let spec = logistic_design(4);
    let x = gen_design(&spec, 400, &mut rng);
    let truth = vec![0.5, -0.5, 0.3, 0.8];
    let y = gen_response(&x, &truth, &EeFamily::Logistic, &mut rng);
    let fit = irls_solve(
        &x,
        &y,
        &EeFamily::Logistic,
        &[0.0; 4],
        &IrlsConfig::for_family(&EeFamily::Logistic),
    )
    .unwrap();
    assert!(fit.converged);
    let oracle = newton_oracle(&x, &y, |e| 1.0 / (1.0 + (-e).exp()), 4);
    assert_vec_close(&fit.beta_sub, &oracle, 1e-7, "logistic newton oracle");

    // Poisson family
    let spec_p = vec![
        CovariateKind::Intercept,
        CovariateKind::Normal,
        CovariateKind::Bernoulli(0.25),
    ];
    let xp = gen_design(&spec_p, 500, &mut rng);
    let truth_p = vec![0.3, -0.3, 0.3];
    let yp = gen_response(&xp, &truth_p, &EeFamily::Poisson, &mut rng);
    let fit_p = irls_solve(
        &xp,
        &yp,
        &EeFamily::Poisson,
        &[0.0; 3],
        &IrlsConfig::for_family(&EeFamily::Poisson),
    )
    .unwrap();
    let oracle_p = newton_oracle(&xp, &yp, |e| e.exp(), 3);
    assert_vec_close(&fit_p.beta_sub, &oracle_p, 1e-7, "poisson newton oracle");
}

#[test]
fn poisson_subset_fit_recovers_truth_within_monte_carlo_error() {
    let truth = vec![0.3, -0.3, 0.3, -0.3, 0.3];
    let spec = vec![
        CovariateKind::Intercept,
        CovariateKind::Normal,
        CovariateKind::Normal,
        CovariateKind::Bernoulli(0.25),
        CovariateKind::Bernoulli(0.1),
    ];
    let mut rng = replicate_rng(72, 0);
    let x = gen_design(&spec, 500, &mut rng);
    let y = gen_response(&x, &truth, &EeFamily::Poisson, &mut rng);
    let cfg = IrlsConfig::for_family(&EeFamily::Poisson);
    let fit = irls_solve(&x, &y, &EeFamily::Poisson, &[0.0; 5], &cfg).unwrap();
    assert!(fit.converged);
    for j in 0..5 {
        let se = fit.v_sub.get(j, j).sqrt();
        assert!(
            (fit.beta_sub[j] - truth[j]).abs() < 3.0 * se,
            "beta{j} {} vs {} (se {se})",
            fit.beta_sub[j],
            truth[j]
        );
    }
}

#[test]
fn cee_sequence_equals_one_shot_aggregation() {
    let mut rng = replicate_rng(73, 0);
    for case in 0..8 {
        let p = 4;
        let spec = logistic_design(p);
        let family = if case % 2 == 0 {
            EeFamily::Logistic
        } else {
            EeFamily::Poisson
        };
        let truth = vec![0.4, -0.4, 0.2, 0.3];
        let k = 2 + case % 5;
        let n_k = 150;
        let x = gen_design(&spec, k * n_k, &mut rng);
        let y = gen_response(&x, &truth, &family, &mut rng);
        let cfg = IrlsConfig::for_family(&family);
        let mut state = CeeState::new(p, cfg.variance);
        let mut fits = Vec::new();
        for c in 0..k {
            let (xc, yc) = slice_rows(&x, &y, c * n_k, n_k);
            let fit = irls_solve(&xc, &yc, &family, &[0.0; 4], &cfg).unwrap();
            state.update(&fit, &xc, &yc, &family).unwrap();
            fits.push(fit);
        }
        // one-shot aggregated combination of the stored subset fits
        let mut a_sum = Matrix::zeros(p, p);
        let mut rhs = vec![0.0; p];
        let mut meat_sum = Matrix::zeros(p, p);
        for f in &fits {
            a_sum.add_assign(&f.a_mat);
            for (r, v) in rhs.iter_mut().zip(f.a_mat.matvec(&f.beta_sub)) {
                *r += v;
            }
            meat_sum.add_assign(&f.a_mat.matmul(&f.v_sub).matmul(&f.a_mat.transpose()));
        }
        let a_inv = to_na(&a_sum).try_inverse().unwrap();
        let one_shot: Vec<f64> = (&a_inv * DVector::from_vec(rhs)).iter().copied().collect();
        assert_vec_close(state.beta().unwrap(), &one_shot, 1e-12, "cee = aee");
        let v_one_shot = &a_inv * to_na(&meat_sum) * a_inv.transpose();
        let v = state.v().unwrap();
        for i in 0..p {
            for j in 0..p {
                let scale = v_one_shot.amax().max(1e-12);
                assert!(
                    (v.get(i, j) - v_one_shot[(i, j)]).abs() <= 1e-12 * scale,
                    "variance cell ({i},{j})"
                );
            }
        }
    }
}

#[test]
fn cuee_sequence_equals_one_shot_solution() {
    let mut rng = replicate_rng(74, 0);
    for case in 0..6 {
        let p = 4;
        let spec = logistic_design(p);
        let family = if case % 2 == 0 {
            EeFamily::Logistic
        } else {
            EeFamily::Poisson
        };
        let truth = vec![0.4, -0.4, 0.2, 0.3];
        let k = 3 + case % 4;
        let n_k = 120;
        let x = gen_design(&spec, k * n_k, &mut rng);
        let y = gen_response(&x, &truth, &family, &mut rng);
        let cfg = IrlsConfig::for_family(&family);
        let mut state = CueeState::new(p, cfg.variance);
        let mut records = Vec::new();
        for c in 0..k {
            let (xc, yc) = slice_rows(&x, &y, c * n_k, n_k);
            records.push(state.update(&xc, &yc, &family, &cfg).unwrap());
        }
        // one-shot: (sum A~)^{-1} (sum A~ beta_check + sum M(beta_check))
        let mut a_sum = Matrix::zeros(p, p);
        let mut rhs = vec![0.0; p];
        for r in &records {
            a_sum.add_assign(&r.a_tilde_chunk);
            for (acc, v) in rhs
                .iter_mut()
                .zip(r.a_tilde_chunk.matvec(&r.beta_check))
            {
                *acc += v;
            }
            for (acc, v) in rhs.iter_mut().zip(&r.m_check) {
                *acc += v;
            }
        }
        let one_shot: Vec<f64> = (to_na(&a_sum).try_inverse().unwrap() * DVector::from_vec(rhs))
            .iter()
            .copied()
            .collect();
        assert_vec_close(
            state.beta_tilde().unwrap(),
            &one_shot,
            1e-12,
            "cuee sequential = one-shot",
        );
    }
}

#[test]
fn linear_family_cumulative_estimators_are_exact() {
    let mut rng = StdRng::seed_from_u64(75);
    let p = 4;
    let data = random_lm_dataset(400, p, None, &mut rng);
    let family = EeFamily::Quasi(LinkFn::Identity);
    let cfg = IrlsConfig::for_family(&family);
    let mut cee = CeeState::new(p, cfg.variance);
    let mut cuee = CueeState::new(p, cfg.variance);
    let bounds = random_partition(400, 5, &mut rng);
    for &(s, l) in &bounds {
        let (xc, yc) = slice_rows(&data.x, &data.y, s, l);
        let fit = irls_solve(&xc, &yc, &family, &[0.0; 4], &cfg).unwrap();
        cee.update(&fit, &xc, &yc, &family).unwrap();
        cuee.update_with_fit(fit, &xc, &yc, &family, &cfg).unwrap();
    }
    let (beta_oracle, _) = batch_ls(&data.x, &data.y);
    assert_vec_close(cee.beta().unwrap(), &beta_oracle, 1e-9, "linear cee = ls");
    assert_vec_close(
        cuee.beta_tilde().unwrap(),
        &beta_oracle,
        1e-9,
        "linear cuee = ls",
    );
}

#[test]
fn larger_chunks_track_the_pooled_fit_more_closely() {
    // median over replicates: error with (n = 2000, K = 10) should beat
    // (n = 200, K = 100) at the same total sample size
    let p = 6;
    let spec = logistic_design(p);
    let truth = vec![1.0; 6];
    let family = EeFamily::Logistic;
    let cfg = IrlsConfig {
        variance: VarianceKind::ModelBased,
        ..IrlsConfig::for_family(&family)
    };
    let reps = 50;
    let n_total = 20_000;
    let mut errors = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut rng = replicate_rng(76, rep as u64);
        let x = gen_design(&spec, n_total, &mut rng);
        let y = gen_response(&x, &truth, &family, &mut rng);
        let pooled = irls_solve(&x, &y, &family, &[0.0; 6], &cfg).unwrap().beta_sub;
        let mut err = [0.0_f64; 2];
        for (slot, &k) in [10usize, 100].iter().enumerate() {
            let n_k = n_total / k;
            let mut cuee = CueeState::new(p, VarianceKind::ModelBased);
            for c in 0..k {
                let (xc, yc) = slice_rows(&x, &y, c * n_k, n_k);
                cuee.update(&xc, &yc, &family, &cfg).unwrap();
            }
            let beta = cuee.beta_tilde().unwrap();
            err[slot] = beta
                .iter()
                .zip(&pooled)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
        }
        errors.push(err);
    }
    let mut big_chunks: Vec<f64> = errors.iter().map(|e| e[0]).collect();
    let mut small_chunks: Vec<f64> = errors.iter().map(|e| e[1]).collect();
    big_chunks.sort_by(f64::total_cmp);
    small_chunks.sort_by(f64::total_cmp);
    let med_big = big_chunks[reps / 2];
    let med_small = small_chunks[reps / 2];
    assert!(
        med_big < med_small,
        "median error {med_big:.4e} (K=10) vs {med_small:.4e} (K=100)"
    );
}

#[test]
fn wald_z_test_has_nominal_size_on_a_null_coefficient() {
    // logistic model whose third coefficient is exactly zero
    let truth = vec![0.3, -0.4, 0.0];
    let spec = vec![
        CovariateKind::Intercept,
        CovariateKind::Normal,
        CovariateKind::Normal,
    ];
    let family = EeFamily::Logistic;
    let cfg = IrlsConfig::for_family(&family);
    let reps = 500;
    let mut rejections = 0usize;
    for rep in 0..reps {
        let mut rng = replicate_rng(78, rep as u64);
        let x = gen_design(&spec, 500, &mut rng);
        let y = gen_response(&x, &truth, &family, &mut rng);
        let fit = irls_solve(&x, &y, &family, &[0.0; 3], &cfg).unwrap();
        let z = fit.beta_sub[2] / fit.v_sub.get(2, 2).sqrt();
        if streamstat_core::dist::chi2_upper(z * z, 1.0) < 0.05 {
            rejections += 1;
        }
    }
    let size = rejections as f64 / reps as f64;
    assert!(
        (0.03..=0.07).contains(&size),
        "empirical size {size} outside [0.03, 0.07]"
    );
}

#[test]
fn warm_start_changes_subset_fits_but_stays_consistent() {
    let p = 3;
    let spec = logistic_design(p);
    let truth = vec![0.5, -0.5, 0.5];
    let family = EeFamily::Logistic;
    let mut rng = replicate_rng(77, 0);
    let x = gen_design(&spec, 600, &mut rng);
    let y = gen_response(&x, &truth, &family, &mut rng);
    let base = IrlsConfig::for_family(&family);
    let warm = IrlsConfig {
        warm_start: true,
        ..base
    };
    let mut cold_state = CueeState::new(p, base.variance);
    let mut warm_state = CueeState::new(p, warm.variance);
    for c in 0..3 {
        let (xc, yc) = slice_rows(&x, &y, c * 200, 200);
        cold_state.update(&xc, &yc, &family, &base).unwrap();
        warm_state.update(&xc, &yc, &family, &warm).unwrap();
    }
    let cold = cold_state.beta_tilde().unwrap();
    let warm_beta = warm_state.beta_tilde().unwrap();
    // same statistical target; finite-sample values differ only slightly
    for (a, b) in cold.iter().zip(warm_beta) {
        assert!((a - b).abs() < 0.1);
    }
}
