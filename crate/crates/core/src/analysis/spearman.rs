use super::AnalysisError;

/// Ranks starting at 1, ties sharing their average rank.
#[derive(Clone, Debug, PartialEq)]
pub struct RankVector(pub Vec<f64>);

impl RankVector {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mut ranks = vec![0.0; n];
        let mut i = 0;
        while i < n {
            let mut j = i + 1;
            while j < n && values[idx[j]] == values[idx[i]] {
                j += 1;
            }
            // positions i..j hold ranks i+1..=j
            let avg = (i + 1 + j) as f64 / 2.0;
            for &k in &idx[i..j] {
                ranks[k] = avg;
            }
            i = j;
        }
        RankVector(ranks)
    }
}

/// Pearson correlation of average ranks; reduces to `1 - 6Σd²/(n(n²-1))`
/// without ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(AnalysisError::TooFewSamples { needed: 3, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    let rx = RankVector::from_values(x).0;
    let ry = RankVector::from_values(y).0;
    let mean = (x.len() + 1) as f64 / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - mean, b - mean);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_values() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman(&x, &[1.0, 4.0, 9.0, 16.0, 25.0]).unwrap(), 1.0);
        assert_eq!(spearman(&x, &[5.0, 3.0, 2.0, 0.0, -9.0]).unwrap(), -1.0);
        assert!((spearman(&x, &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn average_ranks_for_ties() {
        let r = RankVector::from_values(&[10.0, 20.0, 10.0, 30.0]);
        assert_eq!(r.0, vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(matches!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(AnalysisError::ConstantInput)));
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
        assert!(spearman(&[1.0, f64::NAN, 3.0], &[1.0, 2.0, 3.0]).is_err());
    }

    fn distinct_formula(x: &[f64], y: &[f64]) -> f64 {
        let rx = RankVector::from_values(x).0;
        let ry = RankVector::from_values(y).0;
        let n = x.len() as f64;
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    }

    proptest! {
        #[test]
        fn rank_sum(v in prop::collection::vec(-5i32..5, 1..30)) {
            let v: Vec<f64> = v.into_iter().map(f64::from).collect();
            let n = v.len() as f64;
            let s: f64 = RankVector::from_values(&v).0.iter().sum();
            prop_assert!((s - n * (n + 1.0) / 2.0).abs() < 1e-9);
        }

        #[test]
        fn transform_invariance_and_antisymmetry(
            pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40)
        ) {
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            if let Ok(r) = spearman(&x, &y) {
                let tx: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0 * v).collect();
                prop_assert!((spearman(&tx, &y).unwrap() - r).abs() < 1e-12);
                let neg: Vec<f64> = y.iter().map(|v| -v).collect();
                prop_assert!((spearman(&x, &neg).unwrap() + r).abs() < 1e-12);
            }
        }

        #[test]
        fn matches_simplified_form_without_ties(perm in Just((0..12).collect::<Vec<usize>>()).prop_shuffle()) {
            let x: Vec<f64> = (0..12).map(|i| i as f64).collect();
            let y: Vec<f64> = perm.iter().map(|&i| i as f64 * 1.5).collect();
            prop_assert!((spearman(&x, &y).unwrap() - distinct_formula(&x, &y)).abs() < 1e-12);
        }
    }
}
