use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{BlockMatrix, Direction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Within-block midranks, rank 1 being the best value under `direction`.
pub fn block_ranks(matrix: &BlockMatrix, direction: Direction) -> Vec<Vec<f64>> {
    matrix
        .values()
        .iter()
        .map(|row| {
            let keyed: Vec<f64> = match direction {
                Direction::Maximize => row.iter().map(|v| -v).collect(),
                Direction::Minimize => row.clone(),
            };
            super::midranks(&keyed)
        })
        .collect()
}

/// Tie-corrected Friedman chi-square over blocks.
///
/// `χ² = (k-1) [Σ_j R_j² - n² k (k+1)² / 4] / [Σ_ij r_ij² - n k (k+1)² / 4]`
/// where `R_j` are rank sums. Without ties this reduces to the textbook
/// `12 / (n k (k+1)) Σ R_j² - 3 n (k+1)`. A matrix tied in every block
/// gives statistic 0 and p-value 1.
pub fn friedman(matrix: &BlockMatrix, direction: Direction) -> FriedmanResult {
    let ranks = block_ranks(matrix, direction);
    let n = matrix.n_blocks() as f64;
    let k = matrix.n_treatments();
    let kf = k as f64;
    let mut sums = vec![0.0; k];
    let mut sum_sq = 0.0;
    for row in &ranks {
        for (s, r) in sums.iter_mut().zip(row) {
            *s += r;
            sum_sq += r * r;
        }
    }
    let c = n * kf * (kf + 1.0).powi(2) / 4.0;
    let num = (kf - 1.0) * (sums.iter().map(|s| s * s).sum::<f64>() - n * c);
    let den = sum_sq - c;
    let df = k - 1;
    if den <= 1e-12 * c {
        return FriedmanResult {
            statistic: 0.0,
            df,
            p_value: 1.0,
        };
    }
    let statistic = (num / den).max(0.0);
    let chi = ChiSquared::new(df as f64).expect("k >= 2");
    FriedmanResult {
        statistic,
        df,
        p_value: chi.sf(statistic),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(rows: Vec<Vec<f64>>) -> BlockMatrix {
        let k = rows[0].len();
        BlockMatrix::new(
            (0..rows.len()).map(|i| format!("b{i}")).collect(),
            (0..k).map(|j| format!("t{j}")).collect(),
            rows,
        )
        .unwrap()
    }

    #[test]
    fn planted_ordering() {
        let m = matrix(vec![vec![0.9, 0.5, 0.1]; 4]);
        let r = friedman(&m, Direction::Maximize);
        assert!((r.statistic - 8.0).abs() < 1e-12);
        assert_eq!(r.df, 2);
        assert!((r.p_value - (-4.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn all_ties_give_zero() {
        let r = friedman(&matrix(vec![vec![0.3; 4]; 5]), Direction::Maximize);
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn direction_flips_ranks_not_statistic() {
        let m = matrix(vec![
            vec![1.0, 2.0, 3.0],
            vec![2.0, 1.0, 3.0],
            vec![1.0, 3.0, 2.0],
        ]);
        assert_eq!(block_ranks(&m, Direction::Minimize)[0], vec![1.0, 2.0, 3.0]);
        assert_eq!(block_ranks(&m, Direction::Maximize)[0], vec![3.0, 2.0, 1.0]);
        let a = friedman(&m, Direction::Minimize).statistic;
        let b = friedman(&m, Direction::Maximize).statistic;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn twenty_treatments_have_nineteen_df() {
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..20).map(|j| ((i * 7 + j * 3) % 20) as f64).collect())
            .collect();
        assert_eq!(friedman(&matrix(rows), Direction::Maximize).df, 19);
    }

    #[test]
    fn tie_corrected_matches_textbook_without_ties() {
        let rows = vec![
            vec![3.0, 1.0, 2.0, 4.0],
            vec![1.0, 2.0, 4.0, 3.0],
            vec![2.0, 1.0, 3.0, 4.0],
        ];
        let r = friedman(&matrix(rows.clone()), Direction::Minimize);
        let (n, k) = (3.0, 4.0);
        let sums = [6.0, 4.0, 9.0, 11.0];
        let textbook = 12.0 / (n * k * (k + 1.0)) * sums.iter().map(|s: &f64| s * s).sum::<f64>()
            - 3.0 * n * (k + 1.0);
        assert!((r.statistic - textbook).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn invariant_under_monotone_transform(rows in prop::collection::vec(prop::collection::vec(-5i32..5, 4), 3..8)) {
            let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
            let transformed: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| (v / 3.0).exp() * 2.0 + 1.0).collect()).collect();
            let a = friedman(&matrix(rows), Direction::Maximize);
            let b = friedman(&matrix(transformed), Direction::Maximize);
            prop_assert!((a.statistic - b.statistic).abs() < 1e-9);
        }
    }
}
