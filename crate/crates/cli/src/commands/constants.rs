use std::collections::BTreeMap;

use matchvar::constants::{
    alpha_d_monte_carlo, alpha_d_quadrature, alpha_md_d1, alpha_md_monte_carlo, alpha_one, load_constants,
    populate_quadrature, store_constants, ConstantEstimate, ConstantKind, ConstantsTable, GridSpec, Indices, Method,
};

use crate::args::{ConstantsArgs, MethodArg, MAX_D, MAX_M};
use crate::report::{fmt_pm, write_record, CmdResult, Failure, EXIT_MISMATCH};

fn validate(args: &ConstantsArgs) -> CmdResult {
    let (ds, ms) = (&args.d.0, &args.m.0);
    if ds.is_empty() || ds[0] == 0 || ds[ds.len() - 1] > MAX_D {
        return Err(Failure::invalid(format!("--d must lie in 1..={MAX_D}")));
    }
    if ms.is_empty() || ms[0] == 0 || ms[ms.len() - 1] > MAX_M {
        return Err(Failure::invalid(format!("--M must lie in 1..={MAX_M}")));
    }
    if args.samples < 1000 {
        return Err(Failure::invalid("--samples must be at least 1000"));
    }
    match args.method {
        MethodArg::Quadrature if ds.contains(&1) => Err(Failure::new(
            EXIT_MISMATCH,
            "quadrature is not defined at d=1; use --method closed-form",
        )),
        MethodArg::ClosedForm if ds.iter().any(|&d| d > 1) => Err(Failure::new(
            EXIT_MISMATCH,
            "closed forms exist only at d=1; use --method mc or quadrature",
        )),
        _ => Ok(()),
    }
}

pub fn grid_spec(base: u64) -> GridSpec {
    GridSpec { base: base as usize, ..GridSpec::default() }
}

/// A cached entry reusable for this request, if any.
fn cached<'a>(cache: &'a ConstantsTable, args: &ConstantsArgs, kind: ConstantKind, idx: Indices, method: Method) -> Option<&'a ConstantEstimate> {
    if args.recompute {
        return None;
    }
    let e = cache.get(kind, idx, method)?;
    let same = match method {
        Method::MonteCarlo => e.n_samples == Some(args.samples) && e.seed == Some(args.seed),
        Method::Quadrature => e.grid_size.is_some_and(|g| g >= args.grid),
        Method::ClosedForm => true,
    };
    same.then_some(e)
}

fn as_alpha_md(e: &ConstantEstimate, m: usize) -> ConstantEstimate {
    ConstantEstimate { kind: ConstantKind::AlphaMd, indices: Indices::alpha_md(m, e.indices.d), ..e.clone() }
}

fn monte_carlo(args: &ConstantsArgs, cache: &ConstantsTable, d: usize, out: &mut ConstantsTable) -> CmdResult {
    for &m in &args.m.0 {
        let idx = Indices::alpha_md(m, d);
        if let Some(e) = cached(cache, args, ConstantKind::AlphaMd, idx, Method::MonteCarlo) {
            out.insert(e.clone());
            continue;
        }
        if m == 1 {
            let a = alpha_d_monte_carlo(d, args.samples, args.seed)?;
            out.insert(as_alpha_md(&a, 1));
            out.insert(a);
        } else {
            out.insert(alpha_md_monte_carlo(m, d, args.samples, args.seed)?);
        }
    }
    Ok(())
}

fn quadrature(args: &ConstantsArgs, cache: &ConstantsTable, d: usize, out: &mut ConstantsTable) -> CmdResult {
    let hits: Vec<_> = args
        .m
        .0
        .iter()
        .map(|&m| cached(cache, args, ConstantKind::AlphaMd, Indices::alpha_md(m, d), Method::Quadrature))
        .collect();
    if hits.iter().all(Option::is_some) {
        hits.into_iter().flatten().for_each(|e| {
            out.insert(e.clone());
        });
        return Ok(());
    }
    let grid = grid_spec(args.grid);
    let mut scratch = ConstantsTable::new();
    let alpha = alpha_d_quadrature(d, &grid)?;
    scratch.insert(alpha.clone());
    populate_quadrature(&mut scratch, d, args.m.0[args.m.0.len() - 1], &grid)?;
    out.insert(alpha);
    for &m in &args.m.0 {
        let e = scratch
            .get(ConstantKind::AlphaMd, Indices::alpha_md(m, d), Method::Quadrature)
            .expect("populated above");
        out.insert(e.clone());
    }
    Ok(())
}

fn closed_form(args: &ConstantsArgs, out: &mut ConstantsTable) -> CmdResult {
    out.insert(alpha_one());
    for &m in &args.m.0 {
        out.insert(alpha_md_d1(m)?);
    }
    Ok(())
}

/// One table per method, rows `M` and columns `d`.
fn render(table: &ConstantsTable, args: &ConstantsArgs) -> String {
    let mut by_method: BTreeMap<Method, Vec<&ConstantEstimate>> = BTreeMap::new();
    for e in table.iter().filter(|e| e.kind == ConstantKind::AlphaMd) {
        by_method.entry(e.method).or_default().push(e);
    }
    let mut s = String::new();
    for (method, entries) in by_method {
        let ds: Vec<usize> = args.d.0.iter().copied().filter(|d| entries.iter().any(|e| e.indices.d == *d)).collect();
        s += &format!("alpha(M, d) [{method}]\n{:>6}", "M \\ d");
        for d in &ds {
            s += &format!("  {:>18}", d);
        }
        s.push('\n');
        for &m in &args.m.0 {
            s += &format!("{m:>6}");
            for &d in &ds {
                let cell = entries
                    .iter()
                    .find(|e| e.indices == Indices::alpha_md(m, d))
                    .map_or_else(|| "-".to_string(), |e| fmt_pm(e.value, e.error_bound));
                s += &format!("  {cell:>18}");
            }
            s.push('\n');
        }
        s.push('\n');
    }
    s
}

pub fn run(args: &ConstantsArgs) -> CmdResult {
    validate(args)?;
    let mut cache = match &args.cache {
        Some(p) if p.exists() => load_constants(p)?,
        _ => ConstantsTable::new(),
    };
    let mut computed = ConstantsTable::new();
    for &d in &args.d.0 {
        let (mc, quad, closed) = match args.method {
            MethodArg::Mc => (true, false, false),
            MethodArg::Quadrature => (false, true, false),
            MethodArg::ClosedForm => (false, false, true),
            MethodArg::All => (true, d > 1, d == 1),
        };
        if mc {
            monte_carlo(args, &cache, d, &mut computed)?;
        }
        if quad {
            quadrature(args, &cache, d, &mut computed)?;
        }
        if closed {
            closed_form(args, &mut computed)?;
        }
    }
    print!("{}", render(&computed, args));
    if let Some(p) = &args.cache {
        cache.merge(&computed);
        store_constants(&cache, p)?;
    }
    let entries: Vec<&ConstantEstimate> = computed.iter().collect();
    write_record(args.out.as_deref(), "constants", args, &entries, None)
}
