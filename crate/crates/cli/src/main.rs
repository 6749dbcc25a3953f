//! `dbc`: command-line front end for dbc-core.
//!
//! Exit codes: 0 success, 1 domain or validation failure, 2 usage error.

mod svg;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dbc_core::capacity::{default_q_grid, trace_region};
use dbc_core::channel::{validate_dbc, DbcModel, Family, GroupTable, MultTable};
use dbc_core::closed_form::{kuser_z_rates, KUserZParams};
use dbc_core::encode::{simulation_report, CombinerSpec};
use dbc_core::format::{sig12, Units};
use dbc_core::fstar::{fstar_curve, lambda_grid, s_domain, CurveOptions, EnvelopeTable, Method};
use dbc_core::io::read_channel;
use dbc_core::symmetry::{compute_symmetry_group, matrix_symmetry, smallest_transitive_subset, symmetry_report};
use dbc_core::{DbcError, Exec, ProbVector, SimplexGrid};
use serde_json::json;

/// Largest number of rows `zregion` will emit.
const MAX_ZREGION_ROWS: u64 = 1_000_000;

#[derive(Parser)]
#[command(name = "dbc", version, about = "Conditional entropy bounds and capacity regions of degraded broadcast channels")]
struct Cli {
    /// Worker threads for data-parallel stages (default: available parallelism).
    #[arg(long, global = true, env = "DBC_THREADS", value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,

    /// Display unit for entropies and rates. Computation is always in nats.
    #[arg(long, global = true, value_enum, default_value_t = UnitArg::Nats)]
    units: UnitArg,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitArg {
    Nats,
    Bits,
}

impl From<UnitArg> for Units {
    fn from(u: UnitArg) -> Units {
        match u {
            UnitArg::Nats => Units::Nats,
            UnitArg::Bits => Units::Bits,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Primal,
    Dual,
    Closed,
    Oracle,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Primal => Method::Primal,
            MethodArg::Dual => Method::Dual,
            MethodArg::Closed => Method::Closed,
            MethodArg::Oracle => Method::Oracle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CombinerArg {
    /// Binary OR in the Z labeling (k = 2).
    Or,
    /// Group addition, using the channel's group when it declares one.
    Add,
    /// Multiplication in GF(k), or the channel's table.
    Mult,
    /// Smallest transitive subset of the channel's symmetry group.
    Perm,
}

#[derive(Subcommand)]
enum Command {
    /// Check a channel file and its degradedness.
    Validate {
        channel: PathBuf,
    },
    /// Sample F*(q, s) over the admissible range of s.
    Fstar(FstarArgs),
    /// Trace the capacity region boundary.
    Region(RegionArgs),
    /// Report the input-symmetry group of a channel.
    Symmetry {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rates of the K-user broadcast Z channel over a threshold sweep.
    Zregion(ZregionArgs),
    /// Monte Carlo estimate of the rates of a two-stage encoder.
    Simulate(SimulateArgs),
    /// Plot columns of a CSV file as SVG polylines.
    Plot(PlotArgs),
}

#[derive(Args)]
struct FstarArgs {
    #[arg(long)]
    channel: PathBuf,
    /// Input law, comma separated.
    #[arg(long)]
    q: String,
    #[arg(long, default_value_t = 41, value_parser = clap::value_parser!(u32).range(1..))]
    s_samples: u32,
    /// Explicit values of s (nats), comma separated; overrides --s-samples.
    #[arg(long)]
    s: Option<String>,
    /// Resolution of the simplex grid.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    grid: Option<u32>,
    /// Number of λ samples for the dual method.
    #[arg(long, default_value_t = 401, value_parser = clap::value_parser!(u32).range(2..))]
    lambdas: u32,
    #[arg(long, value_enum, default_value_t = MethodArg::Primal)]
    method: MethodArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RegionArgs {
    #[arg(long)]
    channel: PathBuf,
    #[arg(long, default_value_t = 101, value_parser = clap::value_parser!(u32).range(2..))]
    lambdas: u32,
    /// Resolution of the simplex grid used for the envelope.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    grid: Option<u32>,
    /// Resolution of the input-law grid.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    q_grid: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ZregionArgs {
    /// Probability of the noisy input symbol.
    #[arg(long)]
    q: f64,
    /// β_1 ≥ … ≥ β_K, comma separated.
    #[arg(long)]
    betas: String,
    /// Grid points per threshold on [q, 1].
    #[arg(long, default_value_t = 101, value_parser = clap::value_parser!(u32).range(2..))]
    steps: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    channel: PathBuf,
    #[arg(long, value_enum)]
    combiner: CombinerArg,
    /// Law of the first-stage symbol X1.
    #[arg(long)]
    x1: String,
    /// Law of the second-stage symbol X2 (default uniform for perm).
    #[arg(long)]
    x2: Option<String>,
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// CSV file with a header row.
    input: PathBuf,
    /// Column for the horizontal axis.
    #[arg(long)]
    x: Option<String>,
    /// Columns for the vertical axis, one series each.
    #[arg(long)]
    y: Vec<String>,
    #[arg(long)]
    title: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Domain(String),
    Usage(String),
}

impl From<DbcError> for CliError {
    fn from(e: DbcError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Domain(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Domain(format!("csv: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

fn parse_list(name: &str, s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("--{name}: {t:?} is not a number")))
        })
        .collect()
}

fn parse_law(name: &str, s: &str) -> CliResult<ProbVector> {
    ProbVector::new(parse_list(name, s)?).map_err(|e| CliError::Domain(format!("--{name}: {e}")))
}

fn open_out(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> CliResult<()> {
    let mut w = open_out(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn table_for(model: &DbcModel, grid: Option<u32>) -> CliResult<EnvelopeTable> {
    Ok(match grid {
        Some(m) => EnvelopeTable::new_with(model, SimplexGrid::new(model.k(), m as usize)?, Exec::auto())?,
        None => EnvelopeTable::default_for(model)?,
    })
}

fn cmd_validate(channel: &Path) -> CliResult<()> {
    let model = read_channel(channel)?;
    let report = validate_dbc(&model);
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{text}");
    if report.degraded {
        Ok(())
    } else {
        Err(CliError::Domain(report.messages.join("; ")))
    }
}

fn cmd_fstar(a: &FstarArgs, units: Units) -> CliResult<()> {
    let model = read_channel(&a.channel)?;
    let q = parse_law("q", &a.q)?;
    model.check_input(&q)?;
    let opts = CurveOptions {
        grid: a.grid.map(|m| SimplexGrid::new(model.k(), m as usize)).transpose()?,
        lambdas: a.lambdas as usize,
        exec: Exec::auto(),
    };
    let method = Method::from(a.method);
    let samples = match &a.s {
        Some(list) => {
            let (lo, hi) = s_domain(&model, &q);
            let ss = parse_list("s", list)?;
            if let Some(&s) = ss.iter().find(|&&s| s < lo - 1e-12 || s > hi + 1e-12) {
                return Err(CliError::Domain(format!(
                    "s = {} lies outside [H(Y|X), H(Y)] = [{}, {}]",
                    sig12(s),
                    sig12(lo),
                    sig12(hi)
                )));
            }
            let mut out = Vec::with_capacity(ss.len());
            for s in ss {
                out.extend(point_curve(&model, &q, s, method, &opts)?);
            }
            out
        }
        None => fstar_curve(&model, &q, a.s_samples as usize, method, &opts)?.samples,
    };
    let mut w = csv::Writer::from_writer(open_out(a.out.as_deref())?);
    let u = units.suffix();
    w.write_record([format!("s_{u}"), format!("fstar_{u}"), "witness_json".into()])?;
    let c = units.scale();
    for p in &samples {
        w.write_record([sig12(p.s * c), sig12(p.fstar * c), p.witness.to_json()])?;
    }
    w.flush()?;
    Ok(())
}

/// One explicit `s` through the curve machinery.
fn point_curve(
    model: &DbcModel,
    q: &ProbVector,
    s: f64,
    method: Method,
    opts: &CurveOptions,
) -> CliResult<Vec<dbc_core::fstar::FStarSample>> {
    use dbc_core::fstar::{fstar_dual, fstar_primal, FStarSample};
    let (lo, hi) = s_domain(model, q);
    let s = s.clamp(lo, hi);
    let table = || -> CliResult<EnvelopeTable> {
        let grid = opts.grid.unwrap_or_else(|| SimplexGrid::default_for(model.k()));
        Ok(EnvelopeTable::new_with(model, grid, opts.exec)?)
    };
    let sample = match method {
        Method::Primal => {
            let p = fstar_primal(model, q, s, &table()?)?;
            FStarSample { s, fstar: p.value, witness: p.strategy }
        }
        Method::Dual => {
            let d = fstar_dual(model, q, s, &lambda_grid(opts.lambdas), &table()?)?;
            FStarSample { s, fstar: d.value, witness: d.strategy }
        }
        Method::Closed => {
            let (v, w) = dbc_core::closed_form::closed_fstar(model, q, s)?;
            FStarSample { s, fstar: v, witness: w }
        }
        Method::Oracle => {
            let o = dbc_core::oracle::fstar_oracle(model, q, s)?;
            FStarSample { s, fstar: o.value, witness: o.strategy }
        }
    };
    Ok(vec![sample])
}

fn cmd_region(a: &RegionArgs, units: Units) -> CliResult<()> {
    let model = read_channel(&a.channel)?;
    let table = table_for(&model, a.grid)?;
    let q_grid = match a.q_grid {
        Some(m) => SimplexGrid::new(model.k(), m as usize)?.points(),
        None => default_q_grid(model.k()),
    };
    let boundary = trace_region(&model, &lambda_grid(a.lambdas as usize), &q_grid, &table, Exec::auto())?;
    boundary.write_csv(open_out(a.out.as_deref())?, units)?;
    Ok(())
}

fn cmd_symmetry(channel: &Path, out: Option<&Path>) -> CliResult<()> {
    let model = read_channel(channel)?;
    let group = compute_symmetry_group(&model, Exec::auto())?;
    let report = symmetry_report(&group);
    let mut doc = json!({
        "k": model.k(),
        "group": report,
        "transitive_subset": smallest_transitive_subset(&group.set).ok().map(|s| s.perms),
    });
    if let Some(t_zy) = &model.t_zy {
        let set = matrix_symmetry(t_zy, Exec::auto())?;
        doc["t_zy"] = json!({
            "group_size": set.len(),
            "is_transitive": set.is_transitive,
        });
    }
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    write_text(out, &text)
}

/// Non-increasing tuples `t_1 ≥ … ≥ t_r` drawn from `levels`, which is
/// sorted in decreasing order.
fn monotone_tuples(levels: &[f64], r: usize) -> Vec<Vec<f64>> {
    fn rec(levels: &[f64], r: usize, start: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..levels.len() {
            cur.push(levels[i]);
            rec(levels, r, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(levels, r, 0, &mut Vec::with_capacity(r), &mut out);
    out
}

fn cmd_zregion(a: &ZregionArgs, units: Units) -> CliResult<()> {
    let betas = parse_list("betas", &a.betas)?;
    if betas.is_empty() {
        return Err(CliError::Usage("--betas needs at least one value".into()));
    }
    let users = betas.len();
    let steps = a.steps as usize;
    let rows = dbc_core::prob::binomial(steps + users - 2, users - 1);
    if rows > MAX_ZREGION_ROWS as f64 {
        return Err(CliError::Domain(format!(
            "{rows} threshold tuples exceed the limit of {MAX_ZREGION_ROWS}; reduce --steps"
        )));
    }
    if !(0.0 < a.q && a.q <= 1.0) {
        return Err(DbcError::Domain { what: "q".into(), value: a.q, lo: 0.0, hi: 1.0 }.into());
    }
    let levels: Vec<f64> = (0..steps)
        .map(|i| if i + 1 == steps { a.q } else { 1.0 - (1.0 - a.q) * i as f64 / (steps - 1) as f64 })
        .collect();
    let mut w = csv::Writer::from_writer(open_out(a.out.as_deref())?);
    let u = units.suffix();
    let mut header: Vec<String> = (1..users).map(|j| format!("t{j}")).collect();
    header.extend((1..=users).map(|j| format!("R{j}_{u}")));
    w.write_record(&header)?;
    let c = units.scale();
    for inner in monotone_tuples(&levels, users - 1) {
        let p = KUserZParams::new(a.q, betas.clone(), &inner)?;
        let mut row: Vec<String> = inner.iter().map(|&t| sig12(t)).collect();
        row.extend(kuser_z_rates(&p).into_iter().map(|r| sig12(r * c)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs, units: Units) -> CliResult<()> {
    let model = read_channel(&a.channel)?;
    let k = model.k();
    let x1 = parse_law("x1", &a.x1)?;
    let x2 = a.x2.as_deref().map(|s| parse_law("x2", s)).transpose()?;
    let need_x2 = || x2.clone().ok_or_else(|| CliError::Usage("--x2 is required for this combiner".into()));
    let spec = match a.combiner {
        CombinerArg::Or => CombinerSpec::binary_or(x1, need_x2()?)?,
        CombinerArg::Add => {
            let group = match &model.family {
                Some(Family::GroupAdditive { table, .. }) => table.clone(),
                _ => GroupTable::cyclic(k),
            };
            CombinerSpec::group_add(&group, x1, need_x2()?)?
        }
        CombinerArg::Mult => {
            let table = match &model.family {
                Some(Family::Multiplicative { table, .. }) => table.clone(),
                _ => MultTable::gf_prime(k)?,
            };
            CombinerSpec::mult(&table, x1, need_x2()?)?
        }
        CombinerArg::Perm => {
            let group = compute_symmetry_group(&model, Exec::auto())?;
            let sub = smallest_transitive_subset(&group.set)?;
            let x2 = match x2 {
                Some(v) => v,
                None => ProbVector::uniform(sub.l_s),
            };
            CombinerSpec::permutation(&sub.perms, x1, x2)?
        }
    };
    let r = simulation_report(&model, &spec, a.samples, a.seed, Exec::auto())?;
    let c = units.scale();
    let scaled = |v: &[f64]| v.iter().map(|x| x * c).collect::<Vec<_>>();
    let doc = json!({
        "samples": r.samples,
        "seed": r.seed,
        "units": units.suffix(),
        "combiner": spec.kind,
        "input_law": spec.input_law(),
        "empirical_rates": scaled(&r.empirical_rates_nats),
        "analytic_rates": scaled(&r.analytic_rates_nats),
        "abs_error": scaled(&r.abs_error),
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    write_text(a.out.as_deref(), &text)
}

fn cmd_plot(a: &PlotArgs) -> CliResult<()> {
    let mut rdr = csv::Reader::from_path(&a.input)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Domain(format!("{}: no column {name:?}", a.input.display())))
    };
    let starts = |p: &str| header.iter().position(|h| h.starts_with(p));
    let (x, ys) = match (&a.x, a.y.is_empty()) {
        (Some(x), false) => (col(x)?, a.y.iter().map(|y| col(y)).collect::<CliResult<Vec<_>>>()?),
        (Some(x), true) => {
            let xi = col(x)?;
            let yi = (0..header.len()).find(|&i| i != xi).ok_or_else(|| CliError::Domain("need two columns".into()))?;
            (xi, vec![yi])
        }
        (None, _) => {
            let ys: Vec<usize> = a.y.iter().map(|y| col(y)).collect::<CliResult<_>>()?;
            match (starts("R1_"), starts("R2_")) {
                (Some(r1), Some(r2)) if ys.is_empty() => (r1, vec![r2]),
                _ if header.len() < 2 => return Err(CliError::Domain("need two columns".into())),
                _ if ys.is_empty() => (0, vec![1]),
                _ => (0, ys),
            }
        }
    };
    let mut series: Vec<svg::Series> = ys
        .iter()
        .map(|&i| svg::Series { name: header[i].clone(), points: Vec::new() })
        .collect();
    for rec in rdr.records() {
        let rec = rec?;
        let Some(xv) = rec.get(x).and_then(|v| v.trim().parse::<f64>().ok()) else {
            continue;
        };
        for (s, &i) in series.iter_mut().zip(&ys) {
            if let Some(yv) = rec.get(i).and_then(|v| v.trim().parse::<f64>().ok()) {
                s.points.push((xv, yv));
            }
        }
    }
    if series.iter().all(|s| s.points.is_empty()) {
        return Err(CliError::Domain(format!("{}: no numeric rows", a.input.display())));
    }
    let y_label = if ys.len() == 1 { header[ys[0]].clone() } else { "value".into() };
    let plot = svg::Plot {
        title: a
            .title
            .clone()
            .unwrap_or_else(|| a.input.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned())),
        x_label: header[x].clone(),
        y_label,
        series,
    };
    write_text(a.out.as_deref(), &svg::render(&plot))
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .map_err(|e| CliError::Domain(format!("thread pool: {e}")))?;
    }
    let units = Units::from(cli.units);
    match &cli.command {
        Command::Validate { channel } => cmd_validate(channel),
        Command::Fstar(a) => cmd_fstar(a, units),
        Command::Region(a) => cmd_region(a, units),
        Command::Symmetry { channel, out } => cmd_symmetry(channel, out.as_deref()),
        Command::Zregion(a) => cmd_zregion(a, units),
        Command::Simulate(a) => cmd_simulate(a, units),
        Command::Plot(a) => cmd_plot(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tuples_are_non_increasing() {
        let t = monotone_tuples(&[1.0, 0.5, 0.2], 2);
        assert_eq!(t.len(), 6);
        assert!(t.iter().all(|v| v[0] >= v[1]));
        assert_eq!(monotone_tuples(&[1.0, 0.5], 0), vec![Vec::<f64>::new()]);
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_list("q", "0.5, 0.5").unwrap(), vec![0.5, 0.5]);
        assert!(matches!(parse_list("q", "a"), Err(CliError::Usage(_))));
    }
}
