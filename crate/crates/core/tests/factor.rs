mod common;

use std::fs;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

use rolescope::factor::{
    fit_factor_model, loading_strength, paf_from_correlation, read_loadings_csv, rotate_oblimin,
    standardize_columns, FactorOptions, LoadingStrength, PafOptions, RotationOptions,
};

fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("v{j}")).collect()
}

#[test]
fn equicorrelated_three_variables_have_loading_point_eight() {
    let r = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.64 });
    let res = paf_from_correlation(&r, PafOptions::default()).unwrap();
    assert_eq!(res.loadings.ncols(), 1);
    for i in 0..3 {
        assert!(
            (res.loadings[(i, 0)] - 0.8).abs() < 0.01,
            "{}",
            res.loadings[(i, 0)]
        );
        assert!(
            (res.communalities[i] - 0.64).abs() < 0.01,
            "{}",
            res.communalities[i]
        );
    }
    // eigenvalues of the equicorrelation matrix: 1 + 2 rho, then 1 - rho twice
    assert!((res.eigenvalues[0] - 2.28).abs() < 1e-12);
    assert!((res.eigenvalues[1] - 0.36).abs() < 1e-12);
}

#[test]
fn planted_three_factor_model_is_recovered() {
    let planted = common::PlantedFactorModel::standard();
    let x = planted.sample(10_000, 11);
    let z = standardize_columns(&x, &names(19)).unwrap();
    let model = fit_factor_model(&z, FactorOptions::default()).unwrap();
    assert_eq!(model.k(), 3, "eigenvalues {:?}", &model.eigenvalues[..5]);
    let c = common::matched_congruence(&model.loadings, &planted.pattern);
    assert!(c.iter().all(|&v| v >= 0.95), "congruence {c:?}");
    // planted factor correlations come back up to sampling error
    let mut est: Vec<f64> = (0..3)
        .flat_map(|i| (i + 1..3).map(move |j| (i, j)))
        .map(|(i, j)| model.phi[(i, j)].abs())
        .collect();
    est.sort_by(f64::total_cmp);
    let mut truth = vec![0.2, 0.3, 0.4];
    truth.sort_by(f64::total_cmp);
    for (e, t) in est.iter().zip(&truth) {
        assert!((e - t).abs() < 0.08, "phi {est:?} vs {truth:?}");
    }
}

#[test]
fn uncorrelated_variables_retain_nothing() {
    // full two-level factorial: columns exactly orthogonal, R = I
    let x = DMatrix::from_fn(8, 3, |i, j| if (i >> j) & 1 == 1 { 1.0 } else { -1.0 });
    let z = standardize_columns(&x, &names(3)).unwrap();
    assert!(fit_factor_model(&z, FactorOptions::default()).is_err());
}

fn unrotated(seed: u64, p: usize, k: usize) -> DMatrix<f64> {
    let mut r = common::rng(seed);
    DMatrix::from_fn(p, k, |_, _| r.gen_range(-0.7..0.7))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rotation_preserves_communalities(seed in any::<u64>(), p in 4usize..14, k in 2usize..5) {
        let a = unrotated(seed, p, k.min(p - 1));
        let rot = rotate_oblimin(&a, RotationOptions::default());
        let implied = &rot.pattern * &rot.phi * rot.pattern.transpose();
        for i in 0..p {
            let h2: f64 = a.row(i).iter().map(|v| v * v).sum();
            prop_assert!((implied[(i, i)] - h2).abs() < 1e-6, "row {i}: {} vs {h2}", implied[(i, i)]);
        }
        for j in 0..rot.phi.ncols() {
            prop_assert_eq!(rot.phi[(j, j)], 1.0);
        }
    }

    #[test]
    fn standardized_columns_have_zero_mean_unit_variance(
        seed in any::<u64>(), n in 2usize..200, p in 2usize..8, constant in 0usize..8,
    ) {
        let mut r = common::rng(seed);
        let mut x = DMatrix::from_fn(n, p, |_, _| r.gen_range(-1e3..1e3));
        let constant = constant.min(p - 1);
        if constant > 0 {
            x.column_mut(constant).fill(7.5);
        }
        match standardize_columns(&x, &names(p)) {
            Ok(z) => {
                prop_assert_eq!(z.pruned.iter().map(|c| c.index).collect::<Vec<_>>(), (constant > 0).then_some(constant).into_iter().collect::<Vec<_>>());
                for j in 0..z.values.ncols() {
                    let col = z.values.column(j);
                    let mean = col.sum() / n as f64;
                    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                    prop_assert!(mean.abs() < 1e-9, "mean {mean}");
                    prop_assert!((var - 1.0).abs() < 1e-9, "var {var}");
                }
            }
            Err(_) => prop_assert!(p == 2 && constant > 0),
        }
    }
}

#[test]
fn published_loading_table_flags_match_highlighting() {
    let text = fs::read_to_string(common::fixtures().join("reference/loadings.csv")).unwrap();
    let table = read_loadings_csv(text.as_bytes()).unwrap();
    assert_eq!(table.metrics.len(), 19);
    assert_eq!(table.factors.len(), 6);
    assert_eq!(table.loadings[(0, 1)], 1.03);
    assert_eq!(
        (table.communalities[0], table.uniqueness[0]),
        (0.997, 0.003)
    );
    for i in 0..19 {
        // published values are rounded to three places
        assert!(
            (table.communalities[i] + table.uniqueness[i] - 1.0).abs() <= 0.0015,
            "row {i}"
        );
    }
    // the strong/moderate columns transcribe the table's cell colours
    let mut r = csv::Reader::from_reader(text.as_bytes());
    for (i, rec) in r.records().enumerate() {
        let rec = rec.unwrap();
        let split = |s: &str| {
            s.split(';')
                .filter(|x| !x.is_empty())
                .map(str::to_string)
                .collect::<Vec<_>>()
        };
        let n = rec.len();
        assert_eq!(
            table.flagged(LoadingStrength::Strong, i),
            split(&rec[n - 2]),
            "strong, {}",
            &rec[0]
        );
        assert_eq!(
            table.flagged(LoadingStrength::Moderate, i),
            split(&rec[n - 1]),
            "moderate, {}",
            &rec[0]
        );
    }
    assert_eq!(loading_strength(0.30), None);
    assert_eq!(loading_strength(-0.30), None);
    assert_eq!(loading_strength(0.33), Some(LoadingStrength::Moderate));
    assert_eq!(loading_strength(0.52), Some(LoadingStrength::Strong));
}

#[test]
fn published_factor_correlations_form_a_correlation_matrix() {
    let mut r = csv::Reader::from_path(common::fixtures().join("reference/phi.csv")).unwrap();
    let labels: Vec<String> = r
        .headers()
        .unwrap()
        .iter()
        .skip(1)
        .map(str::to_string)
        .collect();
    let rows: Vec<Vec<f64>> = r
        .records()
        .map(|rec| {
            rec.unwrap()
                .iter()
                .skip(1)
                .map(|v| v.parse().unwrap())
                .collect()
        })
        .collect();
    let phi = DMatrix::from_fn(6, 6, |i, j| rows[i][j]);
    let ks = labels
        .iter()
        .position(|l| l == "Knowledge Sharing")
        .unwrap();
    let ic = labels
        .iter()
        .position(|l| l == "Issue Coordination")
        .unwrap();
    assert_eq!(phi[(ks, ic)], 0.70);
    assert_eq!(phi, phi.transpose());
    assert!((0..6).all(|i| phi[(i, i)] == 1.0));
    assert!(phi.symmetric_eigenvalues().iter().all(|&e| e > 0.0));
}
