//! Command-line front end for the `korn` binary.
//!
//! Data goes to `--out` (or stdout). A one-line summary goes to stdout when
//! `--out` is given and to stderr otherwise, and `--quiet` drops it.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::catalog::{self, CatalogEntry, Value, CATALOG_ENV};
use crate::error::{Error, Result};
use crate::group::{GroupSpec, RangeSet};
use crate::korn::{self, Side};
use crate::seminorms::{kernel, kernel_formula_dim, SeminormKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Search bound when deciding whether `rot(G)` is finite.
const ROT_ORDER_LIMIT: usize = 720;

#[derive(Debug, Parser)]
#[command(name = "korn", version, about = "Korn-type rigidity seminorms on objective structures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep the equivalence constants of two seminorms over periods.
    Analyze(AnalyzeArgs),
    /// Kernel dimension of one seminorm, against the closed form.
    Kernel(KernelArgs),
    /// Spectral sums against seminorms on the chain or zigzag.
    FourierCheck(FourierArgs),
    /// Recompute the reference values stored with catalog entries.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Catalog entry name.
    #[arg(long, conflicts_with = "spec_file", required_unless_present = "spec_file")]
    pub structure: Option<String>,
    /// Group spec in TOML.
    #[arg(long)]
    pub spec_file: Option<PathBuf>,
    /// Extra catalog directory searched before the built-ins.
    #[arg(long, env = CATALOG_ENV)]
    pub catalog_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Word list such as "id,t,t^2", or the name of a catalog range.
    #[arg(long)]
    pub range: Option<String>,
    /// Range for the second seminorm; defaults to `--range`.
    #[arg(long)]
    pub range_b: Option<String>,
    #[arg(long, default_value = "PatchIso")]
    pub norm_a: SeminormKind,
    #[arg(long, default_value = "PatchIso0")]
    pub norm_b: SeminormKind,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
    pub periods: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub range: Option<String>,
    #[arg(long, visible_alias = "norm-a", default_value = "PatchIso")]
    pub norm: SeminormKind,
    #[arg(long, value_delimiter = ',', default_value = "4")]
    pub periods: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct FourierArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
    pub periods: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) | Error::SizeOverflow(_) | Error::NotCommuting(_) => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

/// A loaded structure: either a catalog entry or a bare spec file.
struct Loaded {
    spec: Arc<GroupSpec>,
    entry: Option<CatalogEntry>,
}

impl Loaded {
    fn new(c: &Common) -> Result<Self> {
        if let Some(path) = &c.spec_file {
            return Ok(Loaded { spec: Arc::new(GroupSpec::from_file(path)?), entry: None });
        }
        let name = c.structure.as_deref().ok_or_else(|| Error::InvalidInput("no structure given".into()))?;
        let entry = catalog::load_from(name, catalog::catalog_dir(c.catalog_dir.as_deref()).as_deref())?;
        Ok(Loaded { spec: entry.spec.clone(), entry: Some(entry) })
    }

    /// Named catalog range, explicit word list, or the entry's `property2` range.
    fn range(&self, expr: Option<&str>) -> Result<(String, RangeSet)> {
        let expr = match (expr, &self.entry) {
            (Some(e), Some(entry)) if entry.ranges.contains_key(e) => entry.ranges[e].clone(),
            (Some(e), _) => e.to_string(),
            (None, Some(entry)) if entry.ranges.contains_key("property2") => entry.ranges["property2"].clone(),
            _ => return Err(Error::InvalidRange("no --range given and no default range".into())),
        };
        let r = RangeSet::parse(&self.spec, &expr)?;
        Ok((expr, r))
    }
}

fn check_periods(spec: &GroupSpec, periods: &[usize]) -> Result<()> {
    if periods.is_empty() {
        return Err(Error::InvalidInput("no periods given".into()));
    }
    for &n in periods {
        spec.period_factor(n)?;
    }
    Ok(())
}

/// Collects the data in memory, then writes it and the summary line.
struct Output<'a> {
    common: &'a Common,
    data: Vec<u8>,
    summary: Vec<String>,
}

impl<'a> Output<'a> {
    fn new(common: &'a Common) -> Self {
        Output { common, data: Vec::new(), summary: Vec::new() }
    }

    fn json<T: Serialize>(&mut self, v: &T) -> Result<()> {
        serde_json::to_writer_pretty(&mut self.data, v).map_err(|e| Error::Numerical(e.to_string()))?;
        self.data.push(b'\n');
        Ok(())
    }

    fn finish(self, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
        let summary_to_stdout = match &self.common.out {
            Some(path) => {
                let mut f = BufWriter::new(File::create(path)?);
                f.write_all(&self.data)?;
                f.flush()?;
                true
            }
            None => {
                stdout.write_all(&self.data)?;
                false
            }
        };
        if !self.common.quiet {
            let sink: &mut dyn Write = if summary_to_stdout { stdout } else { stderr };
            for line in &self.summary {
                writeln!(sink, "{line}")?;
            }
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct AnalyzeJson<'a> {
    structure: &'a str,
    range_a: &'a str,
    range_b: &'a str,
    reports: &'a [korn::EquivalenceReport],
    exponent: f64,
    diagnosis: &'static str,
}

fn analyze(args: &AnalyzeArgs, out: &mut Output) -> Result<()> {
    let loaded = Loaded::new(&args.common)?;
    let spec = &loaded.spec;
    let (expr_a, ra) = loaded.range(args.range.as_deref())?;
    let (expr_b, rb) = match &args.range_b {
        Some(e) => loaded.range(Some(e))?,
        None => (expr_a.clone(), ra.clone()),
    };
    check_periods(spec, &args.periods)?;
    let result = korn::sweep(spec, &Side::new(ra, args.norm_a), &Side::new(rb, args.norm_b), &args.periods)?;
    match args.common.format {
        Format::Csv => result.write_csv(&mut out.data)?,
        Format::Json => out.json(&AnalyzeJson {
            structure: &spec.name,
            range_a: &expr_a,
            range_b: &expr_b,
            reports: &result.reports,
            exponent: result.exponent,
            diagnosis: result.diagnosis.label(),
        })?,
    }
    out.summary.push(format!("{} exponent={:.6}", result.diagnosis.label(), result.exponent));
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelSummary {
    pub structure: String,
    pub range: String,
    pub kind: SeminormKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub dim: usize,
    pub formula_dim: Option<usize>,
    #[serde(rename = "match")]
    pub matches: Option<bool>,
}

/// Closed-form kernel dimension, when Property 2 holds and `rot(G)` is finite.
pub fn expected_kernel_dim(spec: &GroupSpec, r: &RangeSet, kind: SeminormKind) -> Option<usize> {
    if !spec.has_property_2(r) || !spec.rotation_group_finite(ROT_ORDER_LIMIT) {
        return None;
    }
    Some(match kind {
        SeminormKind::GradPlain => spec.d,
        _ => kernel_formula_dim(spec, spec.affine_dimension(spec.default_sample_radius())),
    })
}

pub fn kernel_summary(spec: &Arc<GroupSpec>, expr: &str, r: &RangeSet, kind: SeminormKind, n: usize) -> Result<KernelSummary> {
    let dim = kernel(spec, r, kind, n)?.dim;
    let formula_dim = expected_kernel_dim(spec, r, kind);
    Ok(KernelSummary {
        structure: spec.name.clone(),
        range: expr.to_string(),
        kind,
        n,
        dim,
        formula_dim,
        matches: formula_dim.map(|f| f == dim),
    })
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn kernel_cmd(args: &KernelArgs, out: &mut Output) -> Result<()> {
    let loaded = Loaded::new(&args.common)?;
    let spec = &loaded.spec;
    let (expr, r) = loaded.range(args.range.as_deref())?;
    check_periods(spec, &args.periods)?;
    let rows = args
        .periods
        .iter()
        .map(|&n| kernel_summary(spec, &expr, &r, args.norm, n))
        .collect::<Result<Vec<_>>>()?;
    match args.common.format {
        Format::Json if rows.len() == 1 => out.json(&rows[0])?,
        Format::Json => out.json(&rows)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out.data);
            w.write_record(["N", "kind", "dim", "formula_dim", "match"])?;
            for s in &rows {
                w.write_record([s.n.to_string(), s.kind.to_string(), s.dim.to_string(), opt(s.formula_dim), opt(s.matches)])?;
            }
            w.flush()?;
        }
    }
    for s in &rows {
        out.summary.push(format!(
            "N={} dim={} formula_dim={} match={}",
            s.n,
            s.dim,
            s.formula_dim.map_or("null".into(), |f| f.to_string()),
            s.matches.map_or("null".into(), |m| m.to_string()),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct FourierRow {
    #[serde(rename = "N")]
    n: usize,
    assertions: Vec<korn::FourierAssertion>,
}

fn fourier_cmd(args: &FourierArgs, out: &mut Output) -> Result<()> {
    let loaded = Loaded::new(&args.common)?;
    let spec = &loaded.spec;
    korn::ClosedForm::detect(spec)?;
    check_periods(spec, &args.periods)?;
    let rows = args
        .periods
        .iter()
        .map(|&n| Ok(FourierRow { n, assertions: korn::fourier_check(spec, n, args.trials, args.seed)? }))
        .collect::<Result<Vec<_>>>()?;
    match args.common.format {
        Format::Json => out.json(&rows)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out.data);
            w.write_record(["N", "variant", "seminorm", "min_ratio", "max_ratio"])?;
            for row in &rows {
                for a in &row.assertions {
                    let variant = match a.variant {
                        korn::WeightVariant::Grad => "grad",
                        korn::WeightVariant::Seminorm => "seminorm",
                    };
                    w.write_record([
                        row.n.to_string(),
                        variant.to_string(),
                        a.seminorm.to_string(),
                        format!("{:.16e}", a.min_ratio),
                        format!("{:.16e}", a.max_ratio),
                    ])?;
                }
            }
            w.flush()?;
        }
    }
    let worst = rows.iter().flat_map(|r| r.assertions.iter().map(|a| a.spread())).fold(0.0, f64::max);
    out.summary.push(format!("max_spread={worst:.6}"));
    Ok(())
}

#[derive(Serialize)]
struct VerifyRow {
    quantity: catalog::Quantity,
    range: Option<String>,
    kind: Option<String>,
    period: Option<usize>,
    expected: Value,
    computed: Value,
    ok: bool,
}

fn verify_cmd(args: &VerifyArgs, out: &mut Output) -> Result<()> {
    let loaded = Loaded::new(&args.common)?;
    let entry = loaded
        .entry
        .ok_or_else(|| Error::InvalidInput("verify needs a catalog entry, not a spec file".into()))?;
    let rows: Vec<VerifyRow> = entry
        .verify()?
        .into_iter()
        .map(|(gt, got)| VerifyRow {
            quantity: gt.quantity,
            range: gt.range,
            kind: gt.kind,
            period: gt.period,
            expected: gt.value,
            computed: got,
            ok: gt.value == got,
        })
        .collect();
    let show = |v: Value| match v {
        Value::Flag(b) => b.to_string(),
        Value::Count(c) => c.to_string(),
    };
    match args.common.format {
        Format::Json => out.json(&rows)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out.data);
            w.write_record(["quantity", "range", "kind", "period", "expected", "computed", "ok"])?;
            for r in &rows {
                let q = serde_json::to_value(r.quantity).map_err(|e| Error::Parse(e.to_string()))?;
                w.write_record([
                    q.as_str().unwrap_or_default().to_string(),
                    opt(r.range.as_ref()),
                    opt(r.kind.as_ref()),
                    opt(r.period),
                    show(r.expected),
                    show(r.computed),
                    r.ok.to_string(),
                ])?;
            }
            w.flush()?;
        }
    }
    let bad = rows.iter().filter(|r| !r.ok).count();
    out.summary.push(format!("{}: {}/{} reference values reproduced", entry.name, rows.len() - bad, rows.len()));
    if bad > 0 {
        return Err(Error::Numerical(format!("{bad} reference values differ")));
    }
    Ok(())
}

/// Runs one parsed command, writing to the given streams.
pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let common = match &cli.command {
        Command::Analyze(a) => &a.common,
        Command::Kernel(a) => &a.common,
        Command::FourierCheck(a) => &a.common,
        Command::Verify(a) => &a.common,
    };
    let mut out = Output::new(common);
    let res = match &cli.command {
        Command::Analyze(a) => analyze(a, &mut out),
        Command::Kernel(a) => kernel_cmd(a, &mut out),
        Command::FourierCheck(a) => fourier_cmd(a, &mut out),
        Command::Verify(a) => verify_cmd(a, &mut out),
    };
    match res {
        Ok(()) => out.finish(stdout, stderr),
        Err(e) => {
            // still report what was computed before a verification mismatch
            if matches!(cli.command, Command::Verify(_)) && !out.data.is_empty() {
                out.finish(stdout, stderr)?;
            }
            Err(e)
        }
    }
}

/// Parses `std::env::args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    match run(&cli, &mut stdout.lock(), &mut stderr.lock()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
