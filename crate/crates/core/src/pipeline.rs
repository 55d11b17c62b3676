//! Glue between the estimation steps: pick a correlation variant of a
//! return panel and turn it into a portfolio problem.

use crate::correlation::{correlation, CorrelationMatrix};
use crate::error::Result;
use crate::markowitz::PortfolioProblem;
use crate::panel::ReturnPanel;
use crate::rmt::{self, RmtPartition};

/// Which correlation matrix feeds the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorrVariant {
    Original,
    RandomBand,
    Filtered,
    Largest,
}

impl CorrVariant {
    pub const ALL: [CorrVariant; 4] = [
        CorrVariant::Original,
        CorrVariant::RandomBand,
        CorrVariant::Filtered,
        CorrVariant::Largest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CorrVariant::Original => "original",
            CorrVariant::RandomBand => "random_band",
            CorrVariant::Filtered => "filtered",
            CorrVariant::Largest => "largest",
        }
    }
}

impl std::str::FromStr for CorrVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        CorrVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                format!("unknown correlation variant `{s}` (expected original, random_band, filtered or largest)")
            })
    }
}

/// Decompose `c` against the law for `q = L / N`.
pub fn rmt_partition(c: &CorrelationMatrix, q: f64) -> Result<RmtPartition> {
    let law = rmt::mp_bounds(q)?;
    let d = rmt::eigendecompose(c)?;
    Ok(rmt::partition(&d, &law))
}

/// The requested variant of `c`. Spectral components get their diagonal
/// restored when `diagonal_repair` is set.
pub fn variant_matrix(
    c: &CorrelationMatrix,
    q: f64,
    variant: CorrVariant,
    diagonal_repair: bool,
) -> Result<CorrelationMatrix> {
    if variant == CorrVariant::Original {
        return Ok(c.clone());
    }
    let p = rmt_partition(c, q)?;
    let component = match variant {
        CorrVariant::RandomBand => p.c_random,
        CorrVariant::Filtered => p.c_filter,
        CorrVariant::Largest => p.c_largest,
        CorrVariant::Original => unreachable!(),
    };
    if diagonal_repair {
        rmt::restore_unit_diagonal(&component)
    } else {
        Ok(component)
    }
}

/// Means and volatilities from `r` itself, correlation per `variant`.
pub fn problem_from_panel(
    r: &ReturnPanel,
    variant: CorrVariant,
    diagonal_repair: bool,
) -> Result<PortfolioProblem> {
    let c = correlation(r)?;
    let q = r.len() as f64 / r.n_assets() as f64;
    problem_from_parts(r, &c, q, variant, diagonal_repair)
}

pub(crate) fn problem_from_parts(
    r: &ReturnPanel,
    c: &CorrelationMatrix,
    q: f64,
    variant: CorrVariant,
    diagonal_repair: bool,
) -> Result<PortfolioProblem> {
    let corr = variant_matrix(c, q, variant, diagonal_repair)?;
    if variant == CorrVariant::Original || diagonal_repair {
        PortfolioProblem::new(r.means(), r.std_devs(), corr)
    } else {
        PortfolioProblem::with_unrepaired_diagonal(r.means(), r.std_devs(), corr)
    }
}
