use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::friedman::{block_ranks, friedman, FriedmanResult};
use super::holm::holm_adjust;
use super::wilcoxon::{wilcoxon_signed_rank, PValueMode};
use crate::error::{Error, Result};

/// Whether larger values (scores) or smaller values (times) are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Maximize,
    Minimize,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maximize" | "max" => Ok(Direction::Maximize),
            "minimize" | "min" => Ok(Direction::Minimize),
            other => Err(Error::invalid(format!("unknown direction '{other}'"))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Maximize => "maximize",
            Direction::Minimize => "minimize",
        })
    }
}

/// Complete `blocks x treatments` table of finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMatrix {
    blocks: Vec<String>,
    treatments: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl BlockMatrix {
    pub fn new(
        blocks: Vec<String>,
        treatments: Vec<String>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if treatments.len() < 2 || blocks.len() < 2 {
            return Err(Error::invalid(
                "need at least two blocks and two treatments",
            ));
        }
        if values.len() != blocks.len() {
            return Err(Error::Shape(format!(
                "{} blocks but {} rows",
                blocks.len(),
                values.len()
            )));
        }
        for (b, row) in blocks.iter().zip(&values) {
            if row.len() != treatments.len() {
                return Err(Error::Shape(format!(
                    "block '{b}' has {} of {} values",
                    row.len(),
                    treatments.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "block '{b}' has a non-finite value"
                )));
            }
        }
        let mut names = treatments.clone();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate treatment name"));
        }
        Ok(Self {
            blocks,
            treatments,
            values,
        })
    }

    pub fn blocks(&self) -> &[String] {
        &self.blocks
    }

    pub fn treatments(&self) -> &[String] {
        &self.treatments
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_treatments(&self) -> usize {
        self.treatments.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub a: usize,
    pub b: usize,
    /// `None` when every paired difference is zero.
    pub statistic: Option<f64>,
    pub p_value: f64,
    pub p_adjusted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankAnalysis {
    pub treatments: Vec<String>,
    pub average_ranks: Vec<f64>,
    pub friedman: FriedmanResult,
    pub pairwise: Vec<PairwiseTest>,
    /// Maximal sets of treatments with every internal pair non-significant,
    /// each sorted by average rank; singletons included.
    pub cliques: Vec<Vec<usize>>,
    pub alpha: f64,
    pub direction: Direction,
}

impl RankAnalysis {
    /// Adjusted p-value of the pair `(i, j)`.
    pub fn adjusted_p(&self, i: usize, j: usize) -> Option<f64> {
        let (a, b) = (i.min(j), i.max(j));
        self.pairwise
            .iter()
            .find(|t| t.a == a && t.b == b)
            .map(|t| t.p_adjusted)
    }

    pub fn not_different(&self, i: usize, j: usize) -> bool {
        i == j || self.adjusted_p(i, j).is_some_and(|p| p >= self.alpha)
    }
}

/// Average ranks, Friedman test, Holm-adjusted pairwise Wilcoxon tests
/// over all treatment pairs, and the cliques of not-significantly-different
/// treatments. Pairs with all-zero differences get p-value 1.
pub fn rank_analysis(
    matrix: &BlockMatrix,
    alpha: f64,
    direction: Direction,
    mode: PValueMode,
) -> Result<RankAnalysis> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    let k = matrix.n_treatments();
    let ranks = block_ranks(matrix, direction);
    let n = matrix.n_blocks() as f64;
    let average_ranks: Vec<f64> = (0..k)
        .map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();

    let columns: Vec<Vec<f64>> = (0..k).map(|j| matrix.column(j)).collect();
    let mut pairwise = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            let (statistic, p_value) = match wilcoxon_signed_rank(&columns[a], &columns[b], mode) {
                Ok(r) => (Some(r.statistic), r.p_value),
                Err(Error::DegeneratePairing) => (None, 1.0),
                Err(e) => return Err(e),
            };
            pairwise.push(PairwiseTest {
                a,
                b,
                statistic,
                p_value,
                p_adjusted: 0.0,
            });
        }
    }
    let raw: Vec<f64> = pairwise.iter().map(|t| t.p_value).collect();
    for (t, adj) in pairwise.iter_mut().zip(holm_adjust(&raw)) {
        t.p_adjusted = adj;
    }

    let mut adjacent = vec![vec![false; k]; k];
    for t in &pairwise {
        let edge = t.p_adjusted >= alpha;
        adjacent[t.a][t.b] = edge;
        adjacent[t.b][t.a] = edge;
    }
    let mut cliques = maximal_cliques(&adjacent);
    for c in &mut cliques {
        c.sort_by(|&x, &y| {
            average_ranks[x]
                .total_cmp(&average_ranks[y])
                .then(x.cmp(&y))
        });
    }
    cliques.sort_by(|x, y| {
        average_ranks[x[0]]
            .total_cmp(&average_ranks[y[0]])
            .then(x.len().cmp(&y.len()).reverse())
            .then(x.cmp(y))
    });

    Ok(RankAnalysis {
        treatments: matrix.treatments().to_vec(),
        average_ranks,
        friedman: friedman(matrix, direction),
        pairwise,
        cliques,
        alpha,
        direction,
    })
}

/// Bron–Kerbosch with pivoting. Every vertex ends up in at least one clique.
pub fn maximal_cliques(adjacent: &[Vec<bool>]) -> Vec<Vec<usize>> {
    fn expand(
        adj: &[Vec<bool>],
        r: &mut Vec<usize>,
        p: Vec<usize>,
        x: Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if p.is_empty() && x.is_empty() {
            let mut c = r.clone();
            c.sort_unstable();
            out.push(c);
            return;
        }
        let pivot = *p
            .iter()
            .chain(&x)
            .max_by_key(|&&u| p.iter().filter(|&&v| adj[u][v]).count())
            .expect("p or x is non-empty");
        let candidates: Vec<usize> = p.iter().copied().filter(|&v| !adj[pivot][v]).collect();
        let (mut p, mut x) = (p, x);
        for v in candidates {
            r.push(v);
            let np = p.iter().copied().filter(|&u| adj[v][u]).collect();
            let nx = x.iter().copied().filter(|&u| adj[v][u]).collect();
            expand(adj, r, np, nx, out);
            r.pop();
            p.retain(|&u| u != v);
            x.push(v);
        }
    }
    let mut out = Vec::new();
    expand(
        adjacent,
        &mut Vec::new(),
        (0..adjacent.len()).collect(),
        Vec::new(),
        &mut out,
    );
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn identical_columns_share_clique_and_rank() {
        let mut rng = rng::seeded(1);
        let values: Vec<Vec<f64>> = (0..12)
            .map(|_| {
                let v: f64 = rng.random();
                vec![v, v, v + 0.5 + rng.random::<f64>()]
            })
            .collect();
        let m = BlockMatrix::new(names("b", 12), names("t", 3), values).unwrap();
        let a = rank_analysis(&m, 0.05, Direction::Maximize, PValueMode::Auto).unwrap();
        assert_eq!(a.average_ranks[0], a.average_ranks[1]);
        assert!(a.cliques.iter().any(|c| c.contains(&0) && c.contains(&1)));
        assert_eq!(a.average_ranks[2], 1.0);
    }

    #[test]
    fn strictly_best_treatment_ranks_first() {
        let values: Vec<Vec<f64>> = (0..5)
            .map(|i| {
                (0..10)
                    .map(|j| if j == 3 { 100.0 } else { (i * j) as f64 })
                    .collect()
            })
            .collect();
        let m = BlockMatrix::new(names("b", 5), names("t", 10), values).unwrap();
        let a = rank_analysis(&m, 0.05, Direction::Maximize, PValueMode::Auto).unwrap();
        assert_eq!(a.average_ranks[3], 1.0);
    }

    #[test]
    fn shifted_column_is_isolated() {
        let mut rng = rng::seeded(3);
        let values: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                (0..4)
                    .map(|j| {
                        let noise: f64 = rng.sample(StandardNormal);
                        0.1 * noise + if j == 2 { 5.0 } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        let m = BlockMatrix::new(names("b", 30), names("t", 4), values).unwrap();
        let a = rank_analysis(&m, 0.05, Direction::Maximize, PValueMode::Auto).unwrap();
        assert!(a.cliques.contains(&vec![2]));
        assert!(a.cliques.iter().all(|c| c == &vec![2] || !c.contains(&2)));
    }

    #[test]
    fn matrix_validation() {
        assert!(BlockMatrix::new(names("b", 1), names("t", 2), vec![vec![1.0, 2.0]]).is_err());
        assert!(BlockMatrix::new(
            names("b", 2),
            names("t", 2),
            vec![vec![1.0, 2.0], vec![1.0]]
        )
        .is_err());
        assert!(BlockMatrix::new(
            names("b", 2),
            vec!["a".into(), "a".into()],
            vec![vec![1.0; 2]; 2]
        )
        .is_err());
        assert!(BlockMatrix::new(
            names("b", 2),
            names("t", 2),
            vec![vec![1.0, f64::NAN], vec![1.0; 2]]
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn cliques_are_maximal_and_complete(edges in prop::collection::vec(any::<bool>(), 28)) {
            let k = 8;
            let mut adj = vec![vec![false; k]; k];
            let mut e = edges.into_iter();
            for i in 0..k {
                for j in i + 1..k {
                    let v = e.next().unwrap();
                    adj[i][j] = v;
                    adj[j][i] = v;
                }
            }
            let cliques = maximal_cliques(&adj);
            for c in &cliques {
                for (x, &i) in c.iter().enumerate() {
                    for &j in &c[x + 1..] {
                        prop_assert!(adj[i][j]);
                    }
                }
                for v in 0..k {
                    if !c.contains(&v) {
                        prop_assert!(c.iter().any(|&u| !adj[u][v]), "clique {:?} extends by {}", c, v);
                    }
                }
            }
            // brute-force count of maximal cliques
            let mut expected = 0;
            for mask in 1u32..(1 << k) {
                let members: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
                let complete = members.iter().all(|&i| members.iter().all(|&j| i == j || adj[i][j]));
                let maximal = (0..k).all(|v| mask >> v & 1 == 1 || members.iter().any(|&u| !adj[u][v]));
                if complete && maximal {
                    expected += 1;
                }
            }
            prop_assert_eq!(cliques.len(), expected);
        }
    }
}
