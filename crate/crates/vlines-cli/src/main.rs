//! `vlines`: command-line front end for enumeration, virtual Poincaré
//! polynomials, local-model checks, chart evaluation and transition checks.
//!
//! Exit codes: 0 success, 1 domain or validation failure, 2 usage error.

use std::collections::BTreeMap;
use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use vlines::charts::{
    evaluate_chart, evaluate_chart_2d, four_point_closed_form_check, four_point_example,
    rational_value, transition_check, ChartPoint, SlicedTree, SlicedTreePair, TransitionReport,
};
use vlines::exact_poly::{format_rational, parse_rational};
use vlines::local_models::check_model;
use vlines::tree_pairs::{enumerate_tree_pairs, f_vector, TreePair};
use vlines::trees::{LeafSet, StableTree};
use vlines::vpp::{shape_violation, vpp, vpp_table};
use vlines::Error;

#[derive(Parser, Debug)]
#[command(
    name = "vlines",
    version,
    about = "Moduli of vertical lines: strata, polynomials, local models and charts"
)]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Pretty, global = true)]
    format: Format,
    /// Size guard: maximum |n|+r for enumeration, maximum dimension for vpp.
    #[arg(long, global = true)]
    max_size: Option<usize>,
    /// Seed for randomized checks.
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Pretty,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the tree-pairs of type n with counts by dimension.
    Enumerate {
        #[arg(value_parser = parse_type)]
        n: TypeVec,
    },
    /// Number of strata per dimension.
    Fvector {
        #[arg(value_parser = parse_type)]
        n: TypeVec,
    },
    /// Virtual Poincaré polynomial of one or more types.
    Vpp {
        #[arg(value_parser = parse_vector, required = true)]
        n: Vec<Vec<usize>>,
    },
    /// Polynomials of every type of the given dimensions.
    VppTable {
        #[arg(required = true)]
        dims: Vec<usize>,
    },
    /// Check the local models of all 0-dimensional tree-pairs of type n.
    CheckLocalModel {
        #[arg(value_parser = parse_type)]
        n: TypeVec,
        /// Randomized normality witnesses per model.
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Evaluate a chart: a tree with `--b` values, or a 0-dimensional
    /// tree-pair with `--b` values for its `a` and `b` coordinates.
    ChartEval {
        /// Tree in nested-list form, e.g. `[[1,[2,3]],4]`.
        #[arg(long, conflicts_with = "tree_pair")]
        tree: Option<String>,
        /// Tree-pair JSON.
        #[arg(long)]
        tree_pair: Option<String>,
        /// Gluing values `name=p/q`, comma separated (e.g. `b1=1/2,b2=0`).
        #[arg(long, default_value = "")]
        b: String,
        /// Free positions as JSON: `{"1,2,3": ["5/2"]}` keyed by screen leaves.
        #[arg(long)]
        free: Option<String>,
    },
    /// Verify a transition map on random points (defaults to the four-point
    /// example, which is also checked against its closed form).
    TransitionCheck {
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

/// A type vector `n` as one positional argument.
#[derive(Clone, Debug)]
struct TypeVec(Vec<usize>);

fn parse_type(s: &str) -> Result<TypeVec, String> {
    parse_vector(s).map(TypeVec)
}

fn parse_vector(s: &str) -> Result<Vec<usize>, String> {
    let v: Result<Vec<usize>, _> = s.split(',').map(|t| t.trim().parse::<usize>()).collect();
    match v {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(format!(
            "`{s}` is not a comma-separated list of nonnegative integers"
        )),
    }
}

/// A failure reported with exit code 1.
struct Failure(String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(e.to_string())
    }
}

type Out = Result<String, Failure>;

fn show_vec(n: &[usize]) -> String {
    format!(
        "({})",
        n.iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(",")
    )
}

fn type_dimension(n: &[usize]) -> Result<usize, Failure> {
    let s: usize = n.iter().sum();
    if s == 0 {
        return Err(Error::ZeroVector.into());
    }
    let d = s as i64 + n.len() as i64 - 3;
    if d < 0 {
        return Err(Failure(format!("type {} is unstable", show_vec(n))));
    }
    Ok(d as usize)
}

fn guard(what: &str, needed: usize, bound: usize) -> Result<(), Failure> {
    if needed > bound {
        return Err(Error::SizeBound {
            what: format!("{what} (raise with --max-size)"),
            needed,
            bound,
        }
        .into());
    }
    Ok(())
}

fn render(format: Format, value: Value, pretty: String) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(&value).unwrap(),
        Format::Pretty => pretty,
    }
}

fn enumerate(cli: &Cli, n: &[usize]) -> Out {
    guard(
        "enumeration |n|+r",
        n.iter().sum::<usize>() + n.len(),
        cli.max_size.unwrap_or(12),
    )?;
    let tps = enumerate_tree_pairs(n)?;
    let mut by_dim: BTreeMap<usize, usize> = BTreeMap::new();
    for t in &tps {
        *by_dim.entry(t.dimension()).or_default() += 1;
    }
    let dims = by_dim
        .iter()
        .map(|(d, c)| format!("{d}:{c}"))
        .collect::<Vec<_>>()
        .join(", ");
    let mut pretty = format!("{} strata: dims [{dims}]", tps.len());
    for t in &tps {
        pretty.push_str(&format!(
            "\n  d={} {}",
            t.dimension(),
            t.to_two_bracketing().to_json()
        ));
    }
    let value = json!({
        "n": n,
        "count": tps.len(),
        "by_dimension": by_dim,
        "tree_pairs": tps.iter().map(|t| json!({"dimension": t.dimension(), "tree_pair": t.to_json()})).collect::<Vec<_>>(),
    });
    Ok(render(cli.format, value, pretty))
}

fn fvector(cli: &Cli, n: &[usize]) -> Out {
    guard(
        "enumeration |n|+r",
        n.iter().sum::<usize>() + n.len(),
        cli.max_size.unwrap_or(12),
    )?;
    let f = f_vector(n)?;
    let pretty = format!("{}: {:?}", show_vec(n), f);
    Ok(render(cli.format, json!({"n": n, "f_vector": f}), pretty))
}

fn vpp_cmd(cli: &Cli, ns: &[Vec<usize>]) -> Out {
    let bound = cli.max_size.unwrap_or(8);
    for n in ns {
        guard("vpp dimension", type_dimension(n)?, bound)?;
    }
    let polys: Vec<_> = ns.par_iter().map(|n| vpp(n)).collect::<Result<_, _>>()?;
    let mut lines = Vec::new();
    let mut rows = Vec::new();
    for (n, p) in ns.iter().zip(&polys) {
        if let Some(v) = shape_violation(n, p) {
            eprintln!(
                "finding: {} violates the shape invariants: {v}",
                show_vec(n)
            );
        }
        lines.push(if ns.len() == 1 {
            p.to_string()
        } else {
            format!("{}: {p}", show_vec(n))
        });
        rows.push(json!({"n": n, "poly": p, "pretty": p.to_string()}));
    }
    let value = if rows.len() == 1 {
        rows.pop().unwrap()
    } else {
        Value::Array(rows)
    };
    Ok(render(cli.format, value, lines.join("\n")))
}

fn vpp_table_cmd(cli: &Cli, dims: &[usize]) -> Out {
    let bound = cli.max_size.unwrap_or(8);
    for &d in dims {
        guard("vpp dimension", d, bound)?;
    }
    let rows = vpp_table(dims)?;
    let width = rows.iter().map(|r| show_vec(&r.n).len()).max().unwrap_or(0);
    let pretty = rows
        .iter()
        .map(|r| format!("d={}  {:width$}  {}", r.dim, show_vec(&r.n), r.poly))
        .collect::<Vec<_>>()
        .join("\n");
    let value = Value::Array(
        rows.iter()
            .map(|r| json!({"dimension": r.dim, "n": r.n, "poly": r.poly, "pretty": r.poly.to_string()}))
            .collect(),
    );
    Ok(render(cli.format, value, pretty))
}

fn check_local_model_cmd(cli: &Cli, n: &[usize], samples: usize) -> Out {
    guard(
        "enumeration |n|+r",
        n.iter().sum::<usize>() + n.len(),
        cli.max_size.unwrap_or(12),
    )?;
    let tps: Vec<TreePair> = enumerate_tree_pairs(n)?
        .into_iter()
        .filter(|t| t.dimension() == 0)
        .collect();
    let checks = tps
        .par_iter()
        .enumerate()
        .map(|(i, tp)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.wrapping_add(i as u64));
            check_model(tp, samples, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let all_ok = checks.iter().all(|c| c.ok());
    let mut pretty = Vec::new();
    let mut rows = Vec::new();
    for c in &checks {
        let status = if c.ok() { "ok" } else { "FAIL" };
        pretty.push(format!(
            "{status}  {}  generators={} spans={} saturated={} incidence={} witnesses={}/{}",
            c.tree_pair.to_two_bracketing().to_json(),
            c.generators,
            c.spans,
            c.saturated,
            c.incidence
                .as_ref()
                .map(|_| "ok".to_string())
                .unwrap_or_else(|e| e.clone()),
            c.witnesses_found,
            samples
        ));
        for f in &c.witness_failures {
            pretty.push(format!("      {f}"));
        }
        rows.push(json!({
            "tree_pair": c.tree_pair.to_json(),
            "generators": c.generators,
            "spans": c.spans,
            "saturated": c.saturated,
            "incidence": c.incidence.as_ref().err(),
            "witnesses_found": c.witnesses_found,
            "witness_failures": c.witness_failures,
        }));
    }
    pretty.push(format!(
        "{} zero-dimensional tree-pairs checked",
        checks.len()
    ));
    let out = render(
        cli.format,
        json!({"n": n, "ok": all_ok, "models": rows}),
        pretty.join("\n"),
    );
    if all_ok {
        Ok(out)
    } else {
        println!("{out}");
        Err(Failure("some local-model checks failed".into()))
    }
}

fn parse_assignments(s: &str) -> Result<BTreeMap<String, vlines::charts::Rat>, Failure> {
    let mut out = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Failure(format!("assignment `{part}` is not of the form name=value")))?;
        out.insert(k.trim().to_string(), parse_rational(v)?);
    }
    Ok(out)
}

fn chart_eval_cmd(
    cli: &Cli,
    tree: &Option<String>,
    tree_pair: &Option<String>,
    b: &str,
    free: &Option<String>,
) -> Out {
    let assignment = parse_assignments(b)?;
    if let Some(tp) = tree_pair {
        let v: Value =
            serde_json::from_str(tp).map_err(|e| Failure(format!("tree-pair JSON: {e}")))?;
        let stp = SlicedTreePair::new(TreePair::from_json(&v)?)?;
        let pc = evaluate_chart_2d(&stp, &assignment)?;
        let value = pc.to_json();
        return Ok(render(
            cli.format,
            value.clone(),
            serde_json::to_string_pretty(&value).unwrap(),
        ));
    }
    let tree = tree
        .as_ref()
        .ok_or_else(|| Failure("one of --tree or --tree-pair is required".into()))?;
    let st = SlicedTree::with_default_slice(StableTree::parse(tree)?)?;
    let mut pt = ChartPoint::from_b(assignment);
    if let Some(f) = free {
        let v: Value =
            serde_json::from_str(f).map_err(|e| Failure(format!("free-position JSON: {e}")))?;
        let obj = v
            .as_object()
            .ok_or_else(|| Failure("free positions must be a JSON object".into()))?;
        for (k, vals) in obj {
            let leaves: LeafSet = k
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| Failure(format!("bad screen key `{k}`")))?;
            let rho = st
                .tree
                .vertex_with_leaves(&leaves)
                .ok_or_else(|| Failure(format!("`{k}` is not a vertex of the tree")))?;
            let xs = vals
                .as_array()
                .ok_or_else(|| Failure("free positions must be arrays".into()))?
                .iter()
                .map(|x| {
                    rational_value(Some(x))
                        .unwrap_or_else(|| Err(Error::Invalid(format!("bad position {x}"))))
                })
                .collect::<Result<Vec<_>, _>>()?;
            pt.free.insert(rho, xs);
        }
    }
    let c = evaluate_chart(&st, &pt)?;
    let mut pretty = vec![format!("tree {}", c.tree())];
    for (&rho, xs) in c.all_positions() {
        let parts: Vec<String> = c
            .tree()
            .children(rho)
            .iter()
            .zip(xs)
            .map(|(&ch, x)| format!("{:?}↦{}", c.tree().leaves(ch), format_rational(x)))
            .collect();
        pretty.push(format!(
            "screen {:?}: {}",
            c.tree().leaves(rho),
            parts.join("  ")
        ));
    }
    Ok(render(cli.format, c.to_json(), pretty.join("\n")))
}

fn report_line(name: &str, r: &TransitionReport) -> String {
    format!(
        "{name}: {} checked, {} skipped, {} failures of {} samples",
        r.checked,
        r.skipped,
        r.failures.len(),
        r.samples
    )
}

fn transition_cmd(cli: &Cli, from: &Option<String>, to: &Option<String>, samples: usize) -> Out {
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let (t1, t2) = match (from, to) {
        (None, None) => four_point_example(),
        (Some(a), Some(b)) => (SlicedTree::parse(a)?, SlicedTree::parse(b)?),
        _ => return Err(Failure("give both --from and --to, or neither".into())),
    };
    for st in [&t1, &t2] {
        if st.tree.dimension() != 0 {
            return Err(Error::NonzeroDimension(st.tree.dimension()).into());
        }
    }
    let mut reports = vec![("round trip", transition_check(&t1, &t2, samples, &mut rng)?)];
    if (&t1, &t2) == (&four_point_example().0, &four_point_example().1) {
        reports.push((
            "closed form ((1-r)/r, rs/(1-r))",
            four_point_closed_form_check(samples, &mut rng)?,
        ));
    }
    let ok = reports.iter().all(|(_, r)| r.ok() && r.checked > 0);
    let pretty = reports
        .iter()
        .map(|(n, r)| report_line(n, r))
        .collect::<Vec<_>>()
        .join("\n");
    let value = json!({
        "from": t1.tree.to_json(),
        "to": t2.tree.to_json(),
        "ok": ok,
        "reports": reports.iter().map(|(n, r)| json!({"check": n, "report": r.to_json()})).collect::<Vec<_>>(),
    });
    let out = render(cli.format, value, pretty);
    if ok {
        Ok(out)
    } else {
        println!("{out}");
        Err(Failure("transition check failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Enumerate { n } => enumerate(&cli, &n.0),
        Command::Fvector { n } => fvector(&cli, &n.0),
        Command::Vpp { n } => vpp_cmd(&cli, n),
        Command::VppTable { dims } => vpp_table_cmd(&cli, dims),
        Command::CheckLocalModel { n, samples } => check_local_model_cmd(&cli, &n.0, *samples),
        Command::ChartEval {
            tree,
            tree_pair,
            b,
            free,
        } => chart_eval_cmd(&cli, tree, tree_pair, b, free),
        Command::TransitionCheck { from, to, samples } => transition_cmd(&cli, from, to, *samples),
    };
    match result {
        Ok(out) => {
            // A closed pipe (e.g. `| head`) is not an error.
            let _ = writeln!(std::io::stdout().lock(), "{out}");
            ExitCode::SUCCESS
        }
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
