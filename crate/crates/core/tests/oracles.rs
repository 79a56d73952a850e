mod common;

use common::*;
use eem::dataset;
use eem::eem::{fit_class_gaussians, solve_beta};
use eem::eval::{self, ModelConfig, TuneOptions};
use eem::feature_map::{Activation, RandomMap};
use eem::linalg::{self, CovDivisor};
use eem::metrics;
use eem::welm::{self, Weighting};
use eem::{Dataset, Discriminant, FitOptions, Matrix, WelmModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[test]
fn ledoit_wolf_matches_reference_estimator() {
    let mut rng = ChaCha8Rng::seed_from_u64(2004);
    for &(n, p) in &[(50, 5), (8, 12), (200, 3), (2, 4)] {
        let x = normal_matrix(n, p, 0.0, &mut rng);
        let (lib, _) = linalg::ledoit_wolf_with(&x, CovDivisor::Samples).unwrap();
        let (reference, eps) = ledoit_wolf_reference(&to_rows(&x));
        assert!((lib.epsilon - eps).abs() <= 1e-12, "n={n} p={p}: ε {} vs {eps}", lib.epsilon);
        for i in 0..p {
            for j in 0..p {
                let got = lib.matrix.as_matrix()[(i, j)];
                assert!((got - reference[i][j]).abs() <= 1e-8, "n={n} p={p} ({i},{j}): {got} vs {}", reference[i][j]);
            }
        }
    }
}

#[test]
fn solver_matches_constrained_minimiser_with_jitter() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..30 {
        let p = rng.random_range(2..=8);
        let hp = normal_matrix(rng.random_range(3..30), p, 0.8, &mut rng);
        let hn = normal_matrix(rng.random_range(3..30), p, 0.0, &mut rng);
        let jitter = if trial % 2 == 0 { 0.0 } else { 0.3 };
        let (pos, neg) = fit_class_gaussians(&hp, &hn, CovDivisor::Samples).unwrap();
        let beta = solve_beta(&pos, &neg, jitter).unwrap().unwrap();

        let (rp, rn) = (to_rows(&hp), to_rows(&hn));
        let m: Vec<f64> = mean_rows(&rp).iter().zip(mean_rows(&rn)).map(|(a, b)| a - b).collect();
        let (sp, _) = ledoit_wolf_reference(&rp);
        let (sn, _) = ledoit_wolf_reference(&rn);
        let mut sigma: Vec<Vec<f64>> = sp.iter().zip(&sn).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
        // the ridge is added to each class covariance
        for (i, row) in sigma.iter_mut().enumerate() {
            row[i] += 2.0 * jitter;
        }
        let reference = constrained_minimiser(&sigma, &m);
        let diff: Vec<f64> = beta.iter().zip(&reference).map(|(a, b)| a - b).collect();
        let rel = (dotp(&diff, &diff) / dotp(&reference, &reference)).sqrt();
        assert!(rel <= 1e-6, "trial {trial}: relative deviation {rel}");
    }
}

#[test]
fn projected_class_means_are_two_apart() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let d = rng.random_range(1..5);
        let xp = normal_matrix(rng.random_range(2..40), d, 1.0, &mut rng);
        let xn = normal_matrix(rng.random_range(2..40), d, 0.0, &mut rng);
        let map: eem::FeatureMap = RandomMap::sample(d, rng.random_range(1..30), Activation::Sig, rng.random()).unwrap().into();
        let (hp, hn) = (map.apply(&xp).unwrap(), map.apply(&xn).unwrap());
        let disc = Discriminant::fit(&hp, &hn, &FitOptions::default()).unwrap();
        let zp = disc.project(&hp).unwrap();
        let zn = disc.project(&hn).unwrap();
        let gap = zp.iter().sum::<f64>() / zp.len() as f64 - zn.iter().sum::<f64>() / zn.len() as f64;
        assert!((gap - 2.0).abs() <= 1e-8, "gap {gap}");
        let stats = disc.projected.unwrap();
        assert!((stats.mean_pos - stats.mean_neg - 2.0).abs() <= 1e-8);
    }
}

fn bayes_label(x: f64, (m_pos, s_pos): (f64, f64), (m_neg, s_neg): (f64, f64)) -> i8 {
    let lp = -(x - m_pos).powi(2) / (2.0 * s_pos) - 0.5 * s_pos.ln();
    let ln = -(x - m_neg).powi(2) / (2.0 * s_neg) - 0.5 * s_neg.ln();
    if lp >= ln {
        1
    } else {
        -1
    }
}

#[test]
fn error_is_close_to_bayes_error_on_known_gaussians() {
    // one-dimensional feature space with known class densities and equal
    // class sizes, so the Bayes rule compares densities
    let cases = [((1.5, 1.0), (0.0, 1.0)), ((2.0, 0.5), (0.0, 2.0)), ((-1.0, 3.0), (0.5, 0.4))];
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for &(pos, neg) in &cases {
            let draw = |rng: &mut ChaCha8Rng, n: usize, (m, s): (f64, f64)| {
                Matrix::from_fn(n, 1, |_, _| m + s.sqrt() * rng.sample::<f64, _>(StandardNormal))
            };
            let disc = Discriminant::fit(&draw(&mut rng, 500, pos), &draw(&mut rng, 500, neg), &FitOptions::default()).unwrap();
            let (tp, tn) = (draw(&mut rng, 5000, pos), draw(&mut rng, 5000, neg));
            let mut model_err = 0;
            let mut bayes_err = 0;
            for (x, label) in tp.rows().map(|r| (r[0], 1)).chain(tn.rows().map(|r| (r[0], -1))) {
                let z = disc.project(&Matrix::from_vec(1, 1, vec![x]).unwrap()).unwrap();
                model_err += usize::from(disc.predict_projected(&z)[0] != label);
                bayes_err += usize::from(bayes_label(x, pos, neg) != label);
            }
            let (me, be) = (model_err as f64 / 100.0, bayes_err as f64 / 100.0);
            assert!(me <= be + 2.0, "seed {seed} {pos:?} {neg:?}: error {me}% vs Bayes {be}%");
        }
    }
}

fn weighted_objective(h: &Matrix, labels: &[i8], beta: &[f64]) -> f64 {
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    h.rows()
        .zip(labels)
        .map(|(r, &l)| {
            let w = 1.0 / if l == 1 { pos } else { neg };
            w * (dotp(r, beta) - f64::from(l)).powi(2)
        })
        .sum()
}

#[test]
fn welm_solution_minimises_weighted_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for &(n, p) in &[(40, 10), (10, 25), (30, 30)] {
        let h = Matrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let labels: Vec<i8> = (0..n).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect();
        let beta = welm::solve_weighted(&h, &labels, Weighting::Balanced).unwrap();
        let best = weighted_objective(&h, &labels, &beta);
        for _ in 0..100 {
            let scale = 10f64.powf(rng.random_range(-4.0..0.0));
            let moved: Vec<f64> = beta.iter().map(|b| b + scale * rng.random_range(-1.0..1.0)).collect();
            assert!(weighted_objective(&h, &labels, &moved) >= best - 1e-10 * (1.0 + best));
        }
    }
}

#[test]
fn balanced_weighting_helps_on_imbalanced_blobs() {
    let mut wins = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let train = gaussian_classes(20, 180, 2, 1.2, &mut rng);
        let test = gaussian_classes(200, 1800, 2, 1.2, &mut rng);
        let map: eem::FeatureMap = RandomMap::sample(2, 30, Activation::Sig, seed).unwrap().into();
        let score = |weighting| {
            let model = WelmModel::fit_dataset(map.clone(), &train, weighting).unwrap();
            let c = metrics::confusion(test.labels(), &model.predict(test.features()).unwrap()).unwrap();
            metrics::gmean(&c)
        };
        let (balanced, plain) = (score(Weighting::Balanced), score(Weighting::None));
        wins += usize::from(balanced >= plain);
    }
    assert_eq!(wins, 10, "balanced weighting lost on {} of 10 seeds", 10 - wins);
}

#[test]
fn kde_and_gaussian_tuning_mostly_agree() {
    let grid = eval::h_grid(ModelConfig::eem(Activation::Rbf, 5, 0), &[5, 20, 50, 100]);
    let mut agree = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds: Dataset = gaussian_classes(150, 250, 4, 0.9, &mut rng);
        let grid: Vec<ModelConfig> = grid.iter().map(|c| ModelConfig { seed, ..*c }).collect();
        let opts = TuneOptions::default();
        let gauss = eval::tune_by_gaussian_dcs(&ds, &grid, &opts).unwrap();
        let kde = eval::tune_by_kde_dcs(&ds, &grid, &opts).unwrap();
        assert_eq!(gauss.fits, grid.len());
        agree += usize::from(gauss.best == kde.best);
    }
    assert!(agree >= 8, "tuning methods agreed on only {agree}/10 seeds");
}

#[test]
fn mirrored_layers_give_parallel_solutions_across_seeds() {
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (hp, hn) = mirrored_hidden_layer(2000, 12, &mut rng);
        let h = Matrix::from_rows(&hp.rows().chain(hn.rows()).collect::<Vec<_>>()).unwrap();
        let labels: Vec<i8> = (0..4000).map(|i| if i < 2000 { 1 } else { -1 }).collect();
        let beta_welm = welm::solve_weighted(&h, &labels, Weighting::Balanced).unwrap();
        let disc = Discriminant::fit(&hp, &hn, &FitOptions::default()).unwrap();
        assert!(cosine(&beta_welm, &disc.beta).abs() >= 0.999, "seed {seed}");
        assert_eq!(welm::sign_labels(&h.matvec(&beta_welm).unwrap()), labels);
        assert_eq!(disc.predict_projected(&disc.project(&h).unwrap()), labels);
    }
}

#[test]
fn scaled_bundled_data_is_in_unit_range() {
    for name in ["breast-cancer", "heart", "diabetes", "blobs"] {
        let ds = bundled(name);
        let scaled = dataset::apply_scaler(&dataset::fit_scaler(&ds), &ds).unwrap();
        assert!(scaled.features().as_slice().iter().all(|v| (0.0..=1.0).contains(v)), "{name}");
    }
}
