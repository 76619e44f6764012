use num_rational::Ratio;

use super::alpha_d::alpha_one;
use super::cijk::{c_ijk_d1_exact, c_ijk_quadrature_all, multinomial_weight, triples, GridSpec};
use super::estimate::{ConstantEstimate, ConstantKind, Indices, Method};
use super::table::ConstantsTable;
use crate::error::{Error, Result};

/// `sum_{i+k <= M-1, j+k <= M-1} c_ijk(1) (i+j+k+1)! / (i! j! k!)`, exactly.
pub fn d1_weighted_sum(m: usize) -> Ratio<i128> {
    triples(m)
        .into_iter()
        .map(|(i, j, k)| {
            let w = multinomial_weight(i, j, k) as i128;
            c_ijk_d1_exact(i, j, k) * Ratio::from_integer(w)
        })
        .sum()
}

/// `alpha(M, 1)` through the generic sum, which equals `M (2M + 1) / 2`.
pub fn alpha_md_d1(m: usize) -> Result<ConstantEstimate> {
    if m == 0 {
        return Err(Error::Domain("M must be at least 1".into()));
    }
    if m > 15 {
        return Err(Error::Domain(format!("exact d = 1 sum supports M <= 15, got {m}")));
    }
    let v = Ratio::new(3, 2) * d1_weighted_sum(m);
    Ok(ConstantEstimate::closed_form(
        ConstantKind::AlphaMd,
        Indices::alpha_md(m, 1),
        *v.numer() as f64 / *v.denom() as f64,
    ))
}

/// A stored `alpha(M, d)` entry if present, otherwise one assembled by [`alpha_md`].
pub fn lookup_alpha_md(m: usize, d: usize, source: &ConstantsTable) -> Result<ConstantEstimate> {
    match source.best(ConstantKind::AlphaMd, Indices::alpha_md(m, d)) {
        Some(e) => Ok(e.clone()),
        None => alpha_md(m, d, source),
    }
}

/// `alpha(M, d)` assembled from the `alpha(d)` and `c_ijk(d)` entries of `source`.
///
/// At `d = 1` the closed forms are used. `c_000 = 1` holds identically in every
/// dimension, so that term never needs a table entry. Error bounds add linearly.
pub fn alpha_md(m: usize, d: usize, source: &ConstantsTable) -> Result<ConstantEstimate> {
    if m == 0 {
        return Err(Error::Domain("M must be at least 1".into()));
    }
    if d == 0 {
        return Err(Error::InvalidDimension(d));
    }
    if d == 1 {
        return alpha_md_d1(m);
    }
    let alpha = source
        .best(ConstantKind::AlphaD, Indices::alpha_d(d))
        .ok_or_else(|| Error::MissingConstant(format!("alpha(d) for d={d}")))?;
    let mut sum = 0.0;
    let mut sum_err = 0.0;
    let mut method = alpha.method;
    let mut grid = None;
    for (i, j, k) in triples(m) {
        let w = multinomial_weight(i, j, k);
        if (i, j, k) == (0, 0, 0) {
            sum += w;
            continue;
        }
        let c = source
            .best(ConstantKind::CIjk, Indices::c_ijk(i, j, k, d))
            .ok_or_else(|| Error::MissingConstant(format!("c_ijk for (i,j,k,d)=({i},{j},{k},{d})")))?;
        sum += w * c.value;
        sum_err += w * c.error_bound;
        if c.method == Method::MonteCarlo || method == Method::ClosedForm {
            method = c.method;
        }
        grid = grid.or(c.grid_size);
    }
    if m > 1 && method == Method::ClosedForm {
        method = Method::Quadrature;
    }
    Ok(ConstantEstimate {
        kind: ConstantKind::AlphaMd,
        indices: Indices::alpha_md(m, d),
        value: alpha.value * sum,
        error_bound: alpha.value * sum_err + alpha.error_bound * sum,
        method,
        n_samples: alpha.n_samples,
        grid_size: grid,
        seed: alpha.seed,
    })
}

/// Fills `table` with quadrature `c_ijk(d)` up to `max_m` and the resulting `alpha(M, d)`.
///
/// Requires an `alpha(d)` entry in the table.
pub fn populate_quadrature(table: &mut ConstantsTable, d: usize, max_m: usize, grid: &GridSpec) -> Result<()> {
    if d == 1 {
        for m in 1..=max_m {
            table.insert(alpha_md_d1(m)?);
        }
        table.insert(alpha_one());
        return Ok(());
    }
    let alpha = table
        .best(ConstantKind::AlphaD, Indices::alpha_d(d))
        .cloned()
        .ok_or_else(|| Error::MissingConstant(format!("alpha(d) for d={d}")))?;
    for c in c_ijk_quadrature_all(d, max_m, grid, &alpha)? {
        table.insert(c);
    }
    for m in 1..=max_m {
        let mut e = alpha_md(m, d, table)?;
        if m == 1 {
            // alpha(1, d) is alpha(d) itself
            e.method = alpha.method;
        }
        table.insert(e);
    }
    Ok(())
}
