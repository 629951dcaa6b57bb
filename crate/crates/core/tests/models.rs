use classplan::classify::{fit_pls, indicator_matrix};
use classplan::simgen::{estimate_class_moments, matrix_root};
use classplan::validate::{fit_inverse_power_law, stratified_folds};
use classplan::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn random_spd(d: usize, seed: u64) -> DMatrix<f64> {
    let data = Population::new(vec![GaussianClassSpec::new("x", DVector::zeros(d), DMatrix::identity(d, d)).unwrap()])
        .unwrap()
        .sample(d, RngSeed::new(seed));
    let a = data.features;
    &a * a.transpose() + DMatrix::identity(d, d) * 0.1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn root_reconstructs_covariance(d in 1usize..=50, seed in 0u64..1000) {
        let cov = random_spd(d, seed);
        let r = matrix_root(&cov).unwrap();
        let err = (&r * r.transpose() - &cov).amax() / cov.amax();
        prop_assert!(err < 1e-10, "relative error {err}");
    }

    #[test]
    fn growing_sets_are_nested(seed in 0u64..1000) {
        let pop = Population::new(make_problem(3, 4, 1.0, true, RngSeed::new(seed)).unwrap()).unwrap();
        let pool = pop.sample(40, RngSeed::new(seed + 1));
        for source in [GrowthSource::Pool(&pool), GrowthSource::Generator(&pop)] {
            let sets = growing_sequence(source, &[3, 7, 20, 40], RngSeed::new(seed)).unwrap();
            for w in sets.windows(2) {
                for c in 0..3 {
                    let small: Vec<_> = w[0].indices_of(c).iter().map(|&i| w[0].features.row(i).into_owned()).collect();
                    let large: Vec<_> = w[1].indices_of(c).iter().map(|&i| w[1].features.row(i).into_owned()).collect();
                    prop_assert!(small.iter().all(|r| large.contains(r)));
                }
            }
        }
    }
}

/// Mardia's multivariate skewness and kurtosis under the true parameters.
#[test]
fn samples_are_multivariate_normal() {
    let d = 6;
    let cov = random_spd(d, 3) / 6.0;
    let mean = DVector::from_fn(d, |i, _| i as f64 - 2.0);
    let spec = GaussianClassSpec::new("x", mean.clone(), cov.clone()).unwrap();
    let n = 4000;
    let x = sample_mvn(&spec, n, RngSeed::new(11)).unwrap().features;
    let inv = cov.try_inverse().unwrap();
    let centered: Vec<DVector<f64>> = (0..n).map(|i| x.row(i).transpose() - &mean).collect();
    let mut kurt = 0.0;
    for c in &centered {
        kurt += (c.transpose() * &inv * c)[0].powi(2);
    }
    let df = d as f64;
    let b2 = kurt / n as f64;
    let z = (b2 - df * (df + 2.0)) / (8.0 * df * (df + 2.0) / n as f64).sqrt();
    assert!(z.abs() < 4.0, "kurtosis z {z}");
    let mut skew = 0.0;
    for c in centered.iter().step_by(4) {
        for e in centered.iter().step_by(4) {
            skew += (c.transpose() * &inv * e)[0].powi(3);
        }
    }
    let m = (n / 4) as f64;
    let stat = skew / (m * m) * m / 6.0;
    let dof = df * (df + 1.0) * (df + 2.0) / 6.0;
    assert!(stat < dof + 5.0 * (2.0 * dof).sqrt(), "skewness statistic {stat} on {dof} dof");
}

#[test]
fn moments_are_recovered() {
    let pop = Population::new(make_problem(2, 3, 2.0, false, RngSeed::new(4)).unwrap()).unwrap();
    let data = pop.sample(20_000, RngSeed::new(5));
    for (est, truth) in estimate_class_moments(&data).unwrap().iter().zip(pop.specs()) {
        assert!((&est.mean - &truth.mean).amax() < 0.05);
        assert!((&est.covariance - &truth.covariance).amax() < 0.08);
    }
}

#[test]
fn simplex_distances_match_separation() {
    let specs = make_problem(5, 8, 3.0, true, RngSeed::new(0)).unwrap();
    for i in 0..5 {
        for j in 0..i {
            assert!(((&specs[i].mean - &specs[j].mean).norm() - 3.0).abs() < 1e-12);
        }
    }
}

fn two_class(sep: f64, n: usize, seed: u64) -> (LabeledDataset, LabeledDataset) {
    let pop = Population::new(make_problem(2, 3, sep, true, RngSeed::new(seed)).unwrap()).unwrap();
    (pop.sample(n, RngSeed::new(seed + 1)), pop.sample(5000, RngSeed::new(seed + 2)))
}

fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    predicted.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

#[test]
fn lda_is_affine_invariant() {
    let (train, test) = two_class(1.5, 50, 1);
    let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, -0.5, 1.0, 0.2, 0.1, 0.0, 0.7]);
    let shift = DVector::from_vec(vec![5.0, -3.0, 1.0]);
    let transform = |x: &DMatrix<f64>| {
        let mut y = x * a.transpose();
        for mut row in y.row_iter_mut() {
            row += shift.transpose();
        }
        y
    };
    let config = LdaConfig { ridge: 0.0, ..LdaConfig::default() };
    let plain = fit_lda(&train, &config).unwrap().predict(&test.features).unwrap();
    let mut moved = train.clone();
    moved.features = transform(&train.features);
    let moved_pred = fit_lda(&moved, &config).unwrap().predict(&transform(&test.features)).unwrap();
    assert_eq!(plain, moved_pred);
}

#[test]
fn full_rank_pls_matches_lda() {
    let pop = Population::new(make_problem(3, 4, 2.0, true, RngSeed::new(8)).unwrap()).unwrap();
    let train = pop.sample(60, RngSeed::new(9));
    let test = pop.sample(500, RngSeed::new(10));
    let config = LdaConfig { ridge: 0.0, ..LdaConfig::default() };
    let lda = fit_lda(&train, &config).unwrap().predict(&test.features).unwrap();
    let pls = fit_pls_lda(&train, 4, &config).unwrap().predict(&test.features).unwrap();
    assert_eq!(lda, pls);
}

#[test]
fn pls_scores_are_orthogonal() {
    let pop = Population::new(make_problem(4, 10, 2.0, true, RngSeed::new(2)).unwrap()).unwrap();
    let train = pop.sample(30, RngSeed::new(3));
    let y = indicator_matrix(&train.labels, 4);
    let proj = fit_pls(&train.features, &y, 5).unwrap();
    let t = proj.transform(&train.features).unwrap();
    let g = t.transpose() * &t;
    for i in 0..g.nrows() {
        for j in 0..i {
            assert!(g[(i, j)].abs() < 1e-8 * g[(i, i)].max(g[(j, j)]), "scores {i},{j} not orthogonal");
        }
    }
}

#[test]
fn easier_problems_score_higher() {
    let mut last = 0.0;
    for sep in [0.5, 1.5, 3.0, 5.0] {
        let (train, test) = two_class(sep, 200, 20);
        let acc =
            accuracy(&fit_lda(&train, &LdaConfig::default()).unwrap().predict(&test.features).unwrap(), &test.labels);
        assert!(acc > last, "separation {sep}: {acc} <= {last}");
        last = acc;
    }
}

#[test]
fn dataset_and_model_files_round_trip() {
    let pop = Population::new(make_problem(3, 5, 2.0, true, RngSeed::new(1)).unwrap()).unwrap();
    let data = pop.sample(12, RngSeed::new(2));
    let mut bin = Vec::new();
    data.write_binary(&mut bin).unwrap();
    assert_eq!(LabeledDataset::read_binary(bin.as_slice()).unwrap(), data);
    let mut text = Vec::new();
    data.write_csv(&mut text).unwrap();
    let back = LabeledDataset::read_csv(text.as_slice()).unwrap();
    assert_eq!(back.features, data.features);
    assert_eq!(back.labels, data.labels);

    let model = fit_pls_lda(&data, 3, &LdaConfig::default()).unwrap();
    let mut buf = Vec::new();
    model.write_binary(&mut buf).unwrap();
    let loaded = PipelineModel::read_binary(buf.as_slice()).unwrap();
    assert_eq!(loaded.predict(&data.features).unwrap(), model.predict(&data.features).unwrap());
    assert!(PipelineModel::read_binary(&bin[..]).is_err());
}

#[test]
fn folds_are_balanced_within_classes() {
    let labels: Vec<usize> = (0..53).map(|i| i % 4).collect();
    let folds = stratified_folds(&labels, 4, 5, true, RngSeed::new(3)).unwrap();
    for c in 0..4 {
        let mut counts = [0; 5];
        for (i, &f) in folds.iter().enumerate() {
            if labels[i] == c {
                counts[f] += 1;
            }
        }
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1, "class {c}: {counts:?}");
    }
    let mut totals = [0; 5];
    folds.iter().for_each(|&f| totals[f] += 1);
    assert!(totals.iter().max().unwrap() - totals.iter().min().unwrap() <= 1);
}

#[test]
fn cv_accounts_training_sizes() {
    let pop = Population::new(make_problem(3, 4, 2.0, true, RngSeed::new(1)).unwrap()).unwrap();
    let data = pop.sample(11, RngSeed::new(2));
    let cv = CvSpec::new(5, 6, 3).unwrap();
    let result = iterated_cv(&data, &ModelConfig::Lda { ridge: 1e-6, priors: PriorMode::Equal }, &cv, None).unwrap();
    let folds = stratified_folds(&data.labels, 3, 5, true, cv.seed.substream(0)).unwrap();
    for (f, &size) in result.train_sizes[0].iter().enumerate() {
        assert_eq!(size, data.len() - folds.iter().filter(|&&x| x == f).count());
    }
    assert!((result.effective_train_size - 0.8 * 33.0).abs() < 1e-12);
    for cm in &result.held_out {
        assert_eq!(cm.total(), data.len() as f64);
    }
}

#[test]
fn cv_is_thread_independent() {
    let pop = Population::new(make_problem(3, 6, 2.0, true, RngSeed::new(1)).unwrap()).unwrap();
    let data = pop.sample(15, RngSeed::new(2));
    let test = pop.sample(100, RngSeed::new(3));
    let cv = CvSpec::new(5, 12, 4).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| iterated_cv(&data, &ModelConfig::default(), &cv, Some(&test)).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn constant_model_has_degenerate_curves() {
    let pop = Population::new(make_problem(3, 4, 2.0, true, RngSeed::new(1)).unwrap()).unwrap();
    let test = pop.sample(50, RngSeed::new(2));
    let curve = validate::learning_curve_population(
        &pop,
        &[4, 8],
        5,
        &ModelConfig::Constant { class: 1 },
        &test,
        RngSeed::new(3),
    )
    .unwrap();
    for p in &curve.points {
        assert_eq!(p.bands[1].mean, 1.0);
        assert_eq!(p.bands[0].hi, 0.0);
        assert!(p.bands.iter().all(|b| b.width() == 0.0));
    }
}

#[test]
fn power_law_fits_a_simulated_curve() {
    let pop = Population::new(make_problem(3, 6, 2.5, true, RngSeed::new(1)).unwrap()).unwrap();
    let test = pop.sample(1000, RngSeed::new(2));
    let curve = validate::learning_curve_population(
        &pop,
        &[4, 8, 16, 32, 64],
        20,
        &ModelConfig::Lda { ridge: 1e-6, priors: PriorMode::Equal },
        &test,
        RngSeed::new(3),
    )
    .unwrap();
    let fit = fit_inverse_power_law(&curve.mean_curve(0)).unwrap();
    assert!(fit.a <= 1.0 && fit.b >= 0.0 && fit.c > 0.0);
    assert!(fit.residual_norm < 0.05, "{fit:?}");
}
