//! Rank-based comparison of treatments over blocks: Friedman test,
//! Holm-adjusted pairwise Wilcoxon signed-rank tests, average ranks and
//! critical-difference grouping.

mod analysis;
mod cd;
mod friedman;
mod holm;
mod ranks;
mod wilcoxon;

pub use analysis::{
    maximal_cliques, rank_analysis, BlockMatrix, Direction, PairwiseTest, RankAnalysis,
};
pub use cd::{cd_bars, render_cd_svg, render_cd_text, write_cd};
pub use friedman::{block_ranks, friedman, FriedmanResult};
pub use holm::holm_adjust;
pub use ranks::{midranks, spearman, tie_groups};
pub use wilcoxon::{wilcoxon_signed_rank, PValueMode, WilcoxonResult, EXACT_LIMIT, EXACT_MAX_N};
