//! `hypergreen` subcommands. [`run`] takes the argument list and output
//! streams and returns the process exit code.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::green::{self, GreenResult};
use crate::oracles;
use crate::quadrature::QuadratureConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FLAGGED: i32 = 2;
pub const EXIT_SELFTEST_FAILED: i32 = 3;

pub const CSV_HEADER: [&str; 7] = ["d", "omega", "re", "im", "abs_error", "piece_j", "flags"];

#[derive(Parser, Debug)]
#[command(name = "hypergreen", version, about = "Local lattice Green function of the hypercubic lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Level {
    Quick,
    Full,
}

#[derive(clap::Args, Debug)]
struct GridArgs {
    #[arg(long)]
    d: u32,
    #[arg(long, allow_negative_numbers = true)]
    omega_min: f64,
    #[arg(long, allow_negative_numbers = true)]
    omega_max: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value_t = 1e-13)]
    rel_tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate G_d at one frequency.
    Eval {
        #[arg(long)]
        d: u32,
        #[arg(long, allow_negative_numbers = true)]
        omega: f64,
        #[arg(long, default_value_t = 1e-13)]
        rel_tol: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Evaluate G_d on a uniform grid, endpoints included.
    Sweep(GridArgs),
    /// Density of states A_d on a uniform grid.
    Dos(GridArgs),
    /// Exact even moments m_0, m_2, …, m_{2 kmax}.
    Moments {
        #[arg(long)]
        d: u32,
        #[arg(long)]
        kmax: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run the built-in consistency checks.
    Selftest {
        #[arg(long, value_enum, default_value_t = Level::Quick)]
        level: Level,
    },
}

/// One evaluated point. JSON writes infinite parts as `"inf"`/`"-inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub d: u32,
    pub omega: f64,
    #[serde(serialize_with = "ser_float", deserialize_with = "de_float")]
    pub re: f64,
    #[serde(serialize_with = "ser_float", deserialize_with = "de_float")]
    pub im: f64,
    pub abs_error: f64,
    pub piece_j: i64,
    pub flags: Vec<String>,
}

fn ser_float<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

fn de_float<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }
    match Repr::deserialize(d)? {
        Repr::Num(x) => Ok(x),
        Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
    }
}

impl From<&GreenResult> for OutputRecord {
    fn from(r: &GreenResult) -> Self {
        OutputRecord {
            d: r.d,
            omega: r.omega,
            re: r.value.re,
            im: r.value.im,
            abs_error: r.abs_error,
            piece_j: r.piece_j,
            flags: r.flags().into_iter().map(String::from).collect(),
        }
    }
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl OutputRecord {
    pub fn csv_fields(&self) -> [String; 7] {
        [
            self.d.to_string(),
            fmt_float(self.omega),
            fmt_float(self.re),
            fmt_float(self.im),
            fmt_float(self.abs_error),
            self.piece_j.to_string(),
            self.flags.join("|"),
        ]
    }

    pub fn from_csv_fields(row: &csv::StringRecord) -> Result<Self, String> {
        if row.len() != CSV_HEADER.len() {
            return Err(format!("expected {} fields, got {}", CSV_HEADER.len(), row.len()));
        }
        let num = |i: usize| row[i].parse::<f64>().map_err(|e| format!("field {}: {e}", CSV_HEADER[i]));
        Ok(OutputRecord {
            d: row[0].parse().map_err(|e| format!("field d: {e}"))?,
            omega: num(1)?,
            re: num(2)?,
            im: num(3)?,
            abs_error: num(4)?,
            piece_j: row[5].parse().map_err(|e| format!("field piece_j: {e}"))?,
            flags: row[6].split('|').filter(|s| !s.is_empty()).map(String::from).collect(),
        })
    }

    pub fn is_flagged(&self) -> bool {
        self.flags.iter().any(|f| f == "divergent" || f == "nonconverged")
    }
}

/// Parse CSV produced by `eval`/`sweep` back into records.
pub fn parse_csv(text: &str) -> Result<Vec<OutputRecord>, String> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(format!("unexpected header {header:?}"));
    }
    rdr.records()
        .map(|row| OutputRecord::from_csv_fields(&row.map_err(|e| e.to_string())?))
        .collect()
}

fn write_records(out: &mut dyn Write, records: &[OutputRecord], format: Format) -> io::Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER)?;
            for r in records {
                w.write_record(r.csv_fields())?;
            }
            w.flush()
        }
        Format::Json => {
            if records.len() == 1 {
                serde_json::to_writer_pretty(&mut *out, &records[0])?;
            } else {
                serde_json::to_writer_pretty(&mut *out, records)?;
            }
            writeln!(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct DosRecord {
    d: u32,
    omega: f64,
    #[serde(serialize_with = "ser_float")]
    dos: f64,
    abs_error: f64,
    piece_j: i64,
    flags: Vec<String>,
}

fn write_dos(out: &mut dyn Write, records: &[DosRecord], format: Format) -> io::Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["d", "omega", "dos", "abs_error", "piece_j", "flags"])?;
            for r in records {
                w.write_record([
                    r.d.to_string(),
                    fmt_float(r.omega),
                    fmt_float(r.dos),
                    fmt_float(r.abs_error),
                    r.piece_j.to_string(),
                    r.flags.join("|"),
                ])?;
            }
            w.flush()
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, records)?;
            writeln!(out)
        }
    }
}

fn config(rel_tol: f64) -> Result<QuadratureConfig, String> {
    let cfg = QuadratureConfig { rel_tol, ..QuadratureConfig::default() };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

/// `steps` points from `lo` to `hi` inclusive.
pub fn grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    let h = (hi - lo) / (steps - 1) as f64;
    (0..steps).map(|i| if i + 1 == steps { hi } else { lo + h * i as f64 }).collect()
}

fn grid_results(g: &GridArgs) -> Result<Vec<GreenResult>, String> {
    if g.steps < 2 {
        return Err("--steps must be at least 2".into());
    }
    if !g.omega_min.is_finite() || !g.omega_max.is_finite() || g.omega_min > g.omega_max {
        return Err("need finite --omega-min ≤ --omega-max".into());
    }
    let cfg = config(g.rel_tol)?;
    green::green_sweep(g.d, &grid(g.omega_min, g.omega_max, g.steps), &cfg).map_err(|e| e.to_string())
}

fn emit(g: &GridArgs, stdout: &mut dyn Write, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> io::Result<()> {
    match &g.out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            body(&mut f)?;
            f.flush()
        }
        None => body(stdout),
    }
}

/// Run the CLI with `args` (program name first) and return the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(stderr, "{text}") } else { write!(stdout, "{text}") };
            return code;
        }
    };
    let fail = |stderr: &mut dyn Write, msg: &str| {
        let _ = writeln!(stderr, "error: {msg}");
        EXIT_USAGE
    };
    match cli.command {
        Command::Eval { d, omega, rel_tol, format } => {
            let cfg = match config(rel_tol) {
                Ok(c) => c,
                Err(m) => return fail(stderr, &m),
            };
            let r = match green::evaluate(d, omega, &cfg) {
                Ok(r) => r,
                Err(e) => return fail(stderr, &e.to_string()),
            };
            let rec = OutputRecord::from(&r);
            if let Err(e) = write_records(stdout, std::slice::from_ref(&rec), format) {
                return fail(stderr, &e.to_string());
            }
            if rec.is_flagged() { EXIT_FLAGGED } else { EXIT_OK }
        }
        Command::Sweep(g) => {
            let results = match grid_results(&g) {
                Ok(r) => r,
                Err(m) => return fail(stderr, &m),
            };
            let records: Vec<OutputRecord> = results.iter().map(OutputRecord::from).collect();
            match emit(&g, stdout, |w| write_records(w, &records, g.format)) {
                Ok(()) => EXIT_OK,
                Err(e) => fail(stderr, &e.to_string()),
            }
        }
        Command::Dos(g) => {
            let results = match grid_results(&g) {
                Ok(r) => r,
                Err(m) => return fail(stderr, &m),
            };
            let records: Vec<DosRecord> = results
                .iter()
                .map(|r| DosRecord {
                    d: r.d,
                    omega: r.omega,
                    dos: if r.divergent { f64::INFINITY } else { r.dos() },
                    abs_error: r.abs_error / std::f64::consts::PI,
                    piece_j: r.piece_j,
                    flags: r.flags().into_iter().map(String::from).collect(),
                })
                .collect();
            match emit(&g, stdout, |w| write_dos(w, &records, g.format)) {
                Ok(()) => EXIT_OK,
                Err(e) => fail(stderr, &e.to_string()),
            }
        }
        Command::Moments { d, kmax, format } => {
            let table = match oracles::moments(d, kmax) {
                Ok(t) => t,
                Err(e) => return fail(stderr, &e.to_string()),
            };
            match write_moments(stdout, &table, format) {
                Ok(()) => EXIT_OK,
                Err(e) => fail(stderr, &e.to_string()),
            }
        }
        Command::Selftest { level } => {
            let checks = selftest(level);
            let mut ok = true;
            for c in &checks {
                ok &= c.passed;
                let _ = writeln!(stdout, "{c}");
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            let _ = writeln!(stdout, "{} checks, {failed} failed", checks.len());
            if ok { EXIT_OK } else { EXIT_SELFTEST_FAILED }
        }
    }
}

#[derive(Serialize)]
struct MomentRow {
    k: usize,
    power: usize,
    numerator: String,
    denominator: String,
    decimal: f64,
}

fn write_moments(out: &mut dyn Write, table: &oracles::MomentTable, format: Format) -> io::Result<()> {
    use num_traits::ToPrimitive;
    let rows: Vec<MomentRow> = table
        .moments
        .iter()
        .enumerate()
        .map(|(k, m)| MomentRow {
            k,
            power: 2 * k,
            numerator: m.numer().to_string(),
            denominator: m.denom().to_string(),
            decimal: m.to_f64().unwrap_or(f64::INFINITY),
        })
        .collect();
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["d", "k", "power", "numerator", "denominator", "decimal"])?;
            for r in &rows {
                w.write_record([
                    table.d.to_string(),
                    r.k.to_string(),
                    r.power.to_string(),
                    r.numerator.clone(),
                    r.denominator.clone(),
                    fmt_float(r.decimal),
                ])?;
            }
            w.flush()
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &serde_json::json!({ "d": table.d, "moments": rows }))?;
            writeln!(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, discrepancy: f64, tolerance: f64) -> Self {
        Check { name: name.into(), discrepancy, tolerance, passed: discrepancy <= tolerance }
    }

    fn failed(name: impl Into<String>, why: impl std::fmt::Display) -> Self {
        Check { name: format!("{} ({why})", name.into()), discrepancy: f64::NAN, tolerance: 0.0, passed: false }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag}  {:<44} discrepancy {:.3e}  tolerance {:.1e}", self.name, self.discrepancy, self.tolerance)
    }
}

/// The check battery behind `selftest`.
pub fn selftest(level: Level) -> Vec<Check> {
    let cfg = QuadratureConfig::default();
    let mut checks = Vec::new();

    match green::green_local(3, 0.0, &cfg) {
        Ok(r) => {
            checks.push(Check::new("G_3(0) imaginary part, 12 digits", (r.value.im + 0.896_440_788_776_8).abs(), 5e-13));
            checks.push(Check::new("G_3(0) real part vanishes", r.value.re.abs(), 1e-12));
        }
        Err(e) => checks.push(Check::failed("G_3(0)", e)),
    }

    let mut worst = 0.0f64;
    let mut failure = None;
    for w in grid(-3.0, 3.0, 25) {
        if w.abs() == 1.0 {
            continue;
        }
        match (green::green_local(1, w, &cfg), oracles::g1_closed_form(w)) {
            (Ok(r), Ok(g)) => worst = worst.max((r.value - g).norm() / g.norm().max(1.0)),
            (Err(e), _) => failure = Some(e.to_string()),
            (_, Err(e)) => failure = Some(e.to_string()),
        }
    }
    checks.push(match failure {
        Some(e) => Check::failed("chain closed form", e),
        None => Check::new("chain closed form on [-3, 3]", worst, 1e-12),
    });

    checks.push(symmetry_check(4, &cfg));

    for (d, w) in [(3u32, 4.0), (5, 6.0), (7, 14.0)] {
        let name = format!("Laurent series d={d} omega={w}");
        match (green::green_local(d, w, &cfg), oracles::laurent_green_auto(d, w, 1e-14)) {
            (Ok(r), Ok(l)) => checks.push(Check::new(name, (r.value - Complex64::new(l.value, 0.0)).norm(), 1e-10)),
            (Err(e), _) => checks.push(Check::failed(name, e)),
            (_, Err(e)) => checks.push(Check::failed(name, e)),
        }
    }

    if level == Level::Full {
        let outer = QuadratureConfig { rel_tol: 1e-10, abs_tol: 1e-12, max_levels: 8, split_point: 1.0 };
        for d in 1..=7u32 {
            let tol = if d <= 2 { 1e-6 } else { 1e-8 };
            let name = format!("normalization d={d}");
            match green::dos_moment(d, 0, &cfg, &outer) {
                Ok(q) => checks.push(Check::new(name, (q.value.re - 1.0).abs(), tol)),
                Err(e) => checks.push(Check::failed(name, e)),
            }
        }
        match green::dos_moment(3, 2, &cfg, &outer) {
            Ok(q) => checks.push(Check::new("second moment d=3", (q.value.re - 1.5).abs(), 1e-6)),
            Err(e) => checks.push(Check::failed("second moment d=3", e)),
        }
        for w in [0.0, 1.5] {
            let name = format!("convolution A_1*A_2 = A_3 at omega={w}");
            match (oracles::dos_convolution(1, 2, w, &cfg), green::dos(3, w, &cfg)) {
                (Ok(c), Ok(a)) => checks.push(Check::new(name, (c.value.re - a).abs(), 1e-8)),
                (Err(e), _) => checks.push(Check::failed(name, e)),
                (_, Err(e)) => checks.push(Check::failed(name, e)),
            }
        }
        match (oracles::bessel_j_fourier(3, 0.0, 2000.0, 4000, 1e-4), green::green_local(3, 0.0, &cfg)) {
            (Ok(f), Ok(r)) => checks.push(Check::new("J0 Fourier integral d=3 omega=0", (f.value - r.value).norm(), 1e-3)),
            (Err(e), _) => checks.push(Check::failed("J0 Fourier integral", e)),
            (_, Err(e)) => checks.push(Check::failed("J0 Fourier integral", e)),
        }
    }
    checks
}

fn symmetry_check(d: u32, cfg: &QuadratureConfig) -> Check {
    let name = format!("symmetry G(-w) = -conj G(w), d={d}");
    let pts = grid(0.05, f64::from(d) + 1.05, 21);
    let neg: Vec<f64> = pts.iter().map(|w| -w).collect();
    let (pos, neg) = match (green::green_sweep(d, &pts, cfg), green::green_sweep(d, &neg, cfg)) {
        (Ok(p), Ok(n)) => (p, n),
        (Err(e), _) | (_, Err(e)) => return Check::failed(name, e),
    };
    // report the worst ratio of mismatch to the allowed 2 × (error sum)
    let mut worst = 0.0f64;
    for (p, n) in pos.iter().zip(&neg) {
        let gap = (n.value + p.value.conj()).norm();
        let allowed = 2.0 * (p.abs_error + n.abs_error) + 4.0 * f64::EPSILON * p.value.norm();
        worst = worst.max(gap / allowed);
    }
    Check::new(name, worst, 1.0)
}
