use matchvar::constants::{bundled_constants, load_constants, ConstantsTable};
use matchvar::simulation::{
    clt_coverage_experiment, decomposition_check, preset, ve_convergence_experiment, DgpSpec, ReplicationContext,
};

use crate::args::{Check, SimulateArgs};
use crate::report::{check, write_record, CmdResult, Failure};

pub fn load_table(cache: Option<&std::path::Path>) -> Result<ConstantsTable, Failure> {
    Ok(match cache {
        Some(p) => load_constants(p)?,
        None => bundled_constants(),
    })
}

fn load_dgp(args: &SimulateArgs) -> Result<DgpSpec, Failure> {
    match (&args.preset, &args.config) {
        (Some(name), _) => Ok(preset(name)?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?;
            Ok(DgpSpec::from_toml(&text)?)
        }
        (None, None) => Err(Failure::invalid("one of --preset or --config is required")),
    }
}

pub fn run(args: &SimulateArgs) -> CmdResult {
    let dgp = load_dgp(args)?;
    let constants = load_table(args.cache.as_deref())?;
    let (m, n, reps) = (args.m as usize, args.n as usize, args.reps as usize);
    println!("dgp {} (d = {}), M = {m}, seed = {}", dgp.name, dgp.d, args.seed);

    if let Some(rep) = args.replay {
        if args.check != Check::Coverage {
            return Err(Failure::invalid("--replay applies to --check coverage"));
        }
        let ctx = ReplicationContext::new(&dgp, m, n, args.level, &constants, !args.no_plugin)?;
        let outcome = ctx.run(args.seed, rep as usize)?;
        println!("replication {rep} at n = {n}");
        println!("tau_hat     {}", outcome.tau_hat);
        println!("B_hat       {}", outcome.b_hat);
        println!("tau_bc      {}", outcome.tau_bc);
        println!("B_M         {}", outcome.b_m);
        println!("E_M         {}", outcome.e_m);
        println!("V_E oracle  {}", outcome.v_e_oracle);
        println!("z (oracle)  {}", outcome.z_oracle);
        println!("CI hit      {}", outcome.ci_hit_oracle);
        return write_record(args.out.as_deref(), "simulate", args, &outcome, None);
    }

    match args.check {
        Check::Coverage => {
            let r = clt_coverage_experiment(&dgp, m, n, reps, args.level, args.seed, &constants, !args.no_plugin)?;
            println!("n = {n}, replications = {reps}, level = {}", r.level);
            println!("sigma2_Md (population)  {}", r.population.sigma2_md);
            println!("coverage (oracle)       {}", r.coverage_oracle);
            if let Some(c) = r.coverage_plugin {
                println!("coverage (plug-in)      {c}");
            }
            println!("3-sigma band            [{}, {}]", r.band.0, r.band.1);
            println!("z mean / variance       {} / {}", r.z_mean, r.z_variance);
            println!("Kolmogorov distance     {}", r.kolmogorov_distance);
            println!("max |residual|          {:e}", r.max_abs_residual);
            write_record(args.out.as_deref(), "simulate", args, &r, Some(r.in_band))?;
            check(r.in_band, "oracle-variance coverage inside the binomial 3-sigma band")
        }
        Check::Ve => {
            let t = ve_convergence_experiment(&dgp, m, &args.n_grid.0, reps, args.seed, &constants)?;
            println!("limit {} over {reps} replications", t.limit);
            println!("{:>8}  {:>14}  {:>10}  {:>10}  {:>20}", "n", "mean V_E", "se", "gap", "seed");
            for row in &t.rows {
                println!(
                    "{:>8}  {:>14.6}  {:>10.6}  {:>+10.5}  {:>20}",
                    row.n, row.mean_v_e, row.se, row.relative_gap, row.seed
                );
            }
            println!("monotone shrinking gap: {}", t.monotone);
            let last = t.rows.last().expect("non-empty grid").relative_gap.abs();
            let passed = last <= args.tolerance;
            write_record(args.out.as_deref(), "simulate", args, &t, Some(passed))?;
            check(passed, &format!("relative gap at the largest n within {}", args.tolerance))
        }
        Check::Decomposition => {
            let r = decomposition_check(&dgp, m, n, args.seed)?;
            println!("tau_hat {}  tau {}  tau_bar(X) {}  E_M {}  B_M {}", r.tau_hat, r.tau, r.tau_bar_x, r.e_m, r.b_m);
            println!("residual {:e}", r.residual);
            let passed = r.residual.abs() <= 1e-10;
            write_record(args.out.as_deref(), "simulate", args, &r, Some(passed))?;
            check(passed, "decomposition residual within 1e-10")
        }
    }
}
