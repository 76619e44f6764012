use std::fmt::Write as _;

use matchvar::constants::{
    alpha_d_quadrature, alpha_md_d1, alpha_one, bundled_constants, load_constants, lookup_alpha_md, populate_quadrature,
    store_constants, ConstantKind, ConstantsTable, Indices, Method,
};
use matchvar::matching::{
    estimate, Dataset, EstimateOptions, EstimateReport, MatchMetric, PropensitySpec, RegressionSpec, SigmaSpec,
    VarianceOptions,
};

use super::constants::grid_spec;
use crate::args::{EstimateArgs, MetricArg, PropensityArg};
use crate::report::{write_record, CmdResult, Failure};

/// The constants table for this run, computing `alpha(M, d)` when asked to.
fn constants_for(args: &EstimateArgs, m: usize, d: usize) -> Result<ConstantsTable, Failure> {
    let mut table = match &args.cache {
        Some(p) if p.exists() => load_constants(p)?,
        Some(_) => ConstantsTable::new(),
        None => bundled_constants(),
    };
    let have = lookup_alpha_md(m, d, &table).is_ok();
    if !(args.recompute || (args.compute_constants && !have)) {
        return if have {
            Ok(table)
        } else {
            Err(Failure::invalid(format!(
                "the constants cache has no alpha(M, d) for M={m}, d={d}; pass --compute-constants"
            )))
        };
    }
    if d == 1 {
        table.insert(alpha_one());
        table.insert(alpha_md_d1(m)?);
    } else {
        let grid = grid_spec(args.grid);
        let alpha = alpha_d_quadrature(d, &grid)?;
        let mut scratch = ConstantsTable::new();
        scratch.insert(alpha.clone());
        populate_quadrature(&mut scratch, d, m, &grid)?;
        table.insert(alpha);
        let e = scratch
            .get(ConstantKind::AlphaMd, Indices::alpha_md(m, d), Method::Quadrature)
            .expect("populated above");
        table.insert(e.clone());
    }
    if let Some(p) = &args.cache {
        store_constants(&table, p)?;
    }
    Ok(table)
}

fn render(r: &EstimateReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "n = {} (n0 = {}, n1 = {}), d = {}, M = {}", r.n, r.n0, r.n1, r.d, r.m);
    let _ = writeln!(s, "tau_hat     {}", r.tau_hat);
    let _ = writeln!(s, "B_hat       {}", r.b_hat);
    let _ = writeln!(s, "tau_bc      {}", r.tau_bc);
    if let Some(v) = &r.variance {
        let _ = writeln!(s, "sigma2_Md   {}", v.sigma2_md);
        let _ = writeln!(s, "  V_E       {}", v.v_e);
        let heuristic = if v.v_tau_x_heuristic { " (heuristic)" } else { "" };
        let _ = writeln!(s, "  V_tau(X)  {}{heuristic}", v.v_tau_x);
        let _ = writeln!(s, "  alpha_Md  {} [{}]", v.alpha_md.value, v.alpha_md.method);
        let _ = writeln!(s, "  e(x)      {:?}", v.propensity_source);
    }
    if let (Some((lo, hi)), Some(se)) = (r.ci, r.standard_error) {
        let _ = writeln!(s, "std. error  {se}");
        let _ = writeln!(s, "{}% CI      [{lo}, {hi}]", r.level * 100.0);
    }
    s
}

pub fn run(args: &EstimateArgs) -> CmdResult {
    let data = Dataset::from_csv_path(&args.input)?;
    let m = args.m as usize;
    let variance = if args.no_ci {
        None
    } else {
        Some(VarianceOptions {
            propensity: match args.propensity {
                PropensityArg::Logistic => PropensitySpec::Logistic,
                PropensityArg::Knn => PropensitySpec::Knn { k: args.knn_k.map(|k| k as usize) },
            },
            sigma: SigmaSpec::NearestNeighbor { j_var: args.j_var as usize },
            ..VarianceOptions::default()
        })
    };
    let constants = if variance.is_some() {
        constants_for(args, m, data.dim())?
    } else {
        ConstantsTable::new()
    };
    let options = EstimateOptions {
        m,
        metric: match args.metric {
            MetricArg::Euclidean => MatchMetric::Euclidean,
            MetricArg::InverseVariance => MatchMetric::InverseVariance,
        },
        regression: (!args.no_bias_correction).then_some(RegressionSpec { degree: args.degree as usize }),
        variance,
        level: args.level,
    };
    let report = estimate(&data, &constants, &options)?;
    print!("{}", render(&report));
    write_record(args.out.as_deref(), "estimate", args, &report, None)
}
