use matchvar::constants::{lookup_alpha_md, ConstantKind, ConstantsTable, Indices};
use matchvar::rng::derive_seed;
use matchvar::voronoi_mc::{
    lemma51_density_check, lemma53_diagnostic, theorem31_experiment, CatchmentEstimator, DensityPairSpec,
    MomentEstimate, Theorem31Config,
};

use super::simulate::load_table;
use crate::args::{EstimatorArg, Experiment, VerifyArgs};
use crate::report::{check, write_record, CmdResult, Failure};

fn density(args: &VerifyArgs) -> Result<DensityPairSpec, Failure> {
    let d = args.d as usize;
    if !(args.ratio > 0.0 && args.ratio.is_finite()) {
        return Err(Failure::invalid("--ratio must be positive"));
    }
    if args.ratio == 1.0 {
        Ok(DensityPairSpec::uniform_torus(d))
    } else {
        Ok(DensityPairSpec::with_ratio(d, args.ratio)?)
    }
}

fn thm31_config(args: &VerifyArgs, spec: &DensityPairSpec, n: usize, seed: u64) -> Theorem31Config {
    Theorem31Config {
        density: spec.clone(),
        m: args.m as usize,
        n,
        replications: args.reps as usize,
        estimator: match args.estimator {
            EstimatorArg::Rays => CatchmentEstimator::Rays { rays: args.rays as usize },
            EstimatorArg::Probes => CatchmentEstimator::Probes { m_probes: args.probes as usize },
        },
        seed,
    }
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol * target.abs()
}

fn print_moments(e: &MomentEstimate) {
    println!(
        "{:>8}  {:>10.5} ± {:<8.5}  {:>10.5} ± {:<8.5}  {:>6}",
        e.n, e.first_moment, e.first_se, e.second_moment, e.second_se, e.probe_fallbacks
    );
}

fn thm31(args: &VerifyArgs, spec: &DensityPairSpec, constants: &ConstantsTable) -> CmdResult {
    let tol = args.tolerance.unwrap_or(0.05);
    let (m, ratio) = (args.m as usize, spec.density_ratio());
    let e = theorem31_experiment(&thm31_config(args, spec, args.n as usize, args.seed))?;
    println!("{:>8}  {:>21}  {:>21}  {:>6}", "n", "first moment", "second moment", "probe");
    print_moments(&e);
    let first_target = m as f64 * ratio;
    let mut passed = within(e.first_moment, first_target, tol);
    println!("first-moment limit   {first_target}");
    match lookup_alpha_md(m, spec.d, constants) {
        Ok(a) => {
            let target = a.value * ratio * ratio;
            println!("second-moment limit  {target} (alpha(M, d) = {} [{}])", a.value, a.method);
            passed &= within(e.second_moment, target, tol);
        }
        Err(_) => println!("second-moment limit  unavailable: no alpha(M, d) in the constants cache"),
    }
    write_record(args.out.as_deref(), "verify", args, &e, Some(passed))?;
    check(passed, &format!("scaled moments within {tol} of their limits"))
}

fn lemma51(args: &VerifyArgs, spec: &DensityPairSpec, constants: &ConstantsTable) -> CmdResult {
    let tol = args.tolerance.unwrap_or(0.10);
    let ratio = spec.density_ratio();
    let rows = lemma51_density_check(spec, &args.v_grid.0, args.samples as usize, args.seed)?;
    let alpha = constants
        .best(ConstantKind::AlphaD, Indices::alpha_d(spec.d))
        .ok_or_else(|| Failure::invalid(format!("no alpha(d) for d={} in the constants cache", spec.d)))?;
    println!("{:>10}  {:>21}  {:>21}", "v", "f_V1(v)", "f_V(v)/v");
    for r in &rows {
        println!("{:>10}  {:>10.5} ± {:<8.5}  {:>10.5} ± {:<8.5}", r.v, r.f_v1, r.f_v1_se, r.f_v_over_v, r.f_v_over_v_se);
    }
    let (t1, t2) = (ratio, alpha.value * ratio * ratio);
    println!("limits as v -> 0     {t1}  {t2}");
    let first = rows.iter().min_by(|a, b| a.v.total_cmp(&b.v)).expect("non-empty grid");
    let passed = within(first.f_v1, t1, tol) && within(first.f_v_over_v, t2, tol);
    write_record(args.out.as_deref(), "verify", args, &rows, Some(passed))?;
    check(passed, &format!("densities at the smallest v within {tol} of their limits"))
}

fn lemma53(args: &VerifyArgs, spec: &DensityPairSpec, constants: &ConstantsTable) -> CmdResult {
    if args.n_grid.0.is_empty() {
        return Err(Failure::invalid("--n-grid is empty"));
    }
    println!("{:>8}  {:>21}  {:>21}  {:>6}", "n", "first moment", "second moment", "probe");
    let mut runs = Vec::with_capacity(args.n_grid.0.len());
    for &n in &args.n_grid.0 {
        let e = theorem31_experiment(&thm31_config(args, spec, n, derive_seed(args.seed, n as u64)))?;
        print_moments(&e);
        runs.push(e);
    }
    let report = lemma53_diagnostic(&runs, constants)?;
    println!("first-moment limit   {}", report.first_asymptote);
    if let Some(a) = report.second_asymptote {
        println!("second-moment limit  {a}");
    }
    let passed = !report.divergent;
    write_record(args.out.as_deref(), "verify", args, &(&runs, &report), Some(passed))?;
    check(passed, "scaled moments stay bounded in n")
}

pub fn run(args: &VerifyArgs) -> CmdResult {
    let spec = density(args)?;
    let constants = load_table(args.cache.as_deref())?;
    println!(
        "{:?}: d = {}, M = {}, f1/f0 = {}, seed = {}",
        args.experiment, spec.d, args.m, spec.density_ratio(), args.seed
    );
    match args.experiment {
        Experiment::Thm31 => thm31(args, &spec, &constants),
        Experiment::Lemma51 => lemma51(args, &spec, &constants),
        Experiment::Lemma53 => lemma53(args, &spec, &constants),
    }
}
