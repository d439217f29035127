//! Subcommands and their JSON reports.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use kundt_core::appendix::appendix_quotient_check;
use kundt_core::catalog::{self, Class, InvarianceReport, Method, Source, VerifyOptions};
use kundt_core::pseudogroup::{self, hilbert_closed_form, orbit_dim_closed_form};
use kundt_core::signature::{self, MetricSection, Verdict};
use kundt_core::{EqKind, EquationSystem, KundtError};
use serde_json::{json, Map, Value};

pub const SCHEMA: u32 = 1;
/// Overrides the symbolic time budget of `verify`.
pub const BUDGET_ENV: &str = "KUNDT_TIME_BUDGET_SECS";
/// Overrides the number of random points of sampled checks.
pub const RETRIES_ENV: &str = "KUNDT_RETRIES";

#[derive(Parser, Debug)]
#[command(name = "kundt", version, about = "Differential invariants of Kundt metrics")]
pub struct Cli {
    /// Seed for every random point and sample.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Enables rank computations for n >= 5.
    #[arg(long, global = true)]
    pub slow: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Jet-space dimensions, enumerated against the closed forms.
    Dims {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "E")]
        kind: String,
        #[arg(long, default_value_t = 3)]
        kmax: u32,
    },
    /// Generic orbit dimensions by exact rank, plus the 1-jet stabilizer.
    OrbitDim {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "E")]
        kind: String,
        #[arg(long, default_value_t = 3)]
        kmax: u32,
    },
    /// Hilbert function from exact orbit ranks.
    Hilbert {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "E")]
        kind: String,
        #[arg(long, default_value_t = 3)]
        kmax: u32,
    },
    /// Poincaré series coefficients against the Hilbert function.
    Poincare {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "E")]
        kind: String,
        #[arg(long, default_value_t = 3)]
        kmax: u32,
    },
    /// Invariance of every catalog entry of a dimension and class.
    Verify {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        class: String,
    },
    /// Lists catalog entries.
    Catalog {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        class: Option<String>,
    },
    /// General or degenerate Kundt, for a metric file.
    Classify { file: PathBuf },
    /// Samples the signature of a metric file.
    Signature {
        file: PathBuf,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Compares the sampled signatures of two metric files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = signature::DEFAULT_TOL)]
        tol: f64,
    },
    /// Checks the two-field quotient of the relative-invariant analysis.
    AppendixCheck {
        /// Level `W_v = c` of the normal form.
        #[arg(long, default_value = "3/2")]
        level: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Malformed,
}

enum CliError {
    Malformed(String),
    Failed(String),
}

impl From<KundtError> for CliError {
    fn from(e: KundtError) -> Self {
        match e {
            KundtError::Invalid(_) | KundtError::UnsupportedDimension(_) | KundtError::Expr(_) | KundtError::UnknownEntry(_) => {
                CliError::Malformed(e.to_string())
            }
            other => CliError::Failed(other.to_string()),
        }
    }
}

type CmdResult = std::result::Result<Report, CliError>;

/// A finished run: pass/fail, JSON fields, and an optional text rendering.
struct Report {
    ok: bool,
    fields: Map<String, Value>,
    text: Option<String>,
}

impl Report {
    fn new(ok: bool, fields: Value) -> Report {
        let fields = match fields {
            Value::Object(m) => m,
            other => Map::from_iter([("result".to_string(), other)]),
        };
        Report { ok, fields, text: None }
    }

    fn with_text(mut self, text: String) -> Report {
        self.text = Some(text);
        self
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Dims { .. } => "dims",
        Command::OrbitDim { .. } => "orbit-dim",
        Command::Hilbert { .. } => "hilbert",
        Command::Poincare { .. } => "poincare",
        Command::Verify { .. } => "verify",
        Command::Catalog { .. } => "catalog",
        Command::Classify { .. } => "classify",
        Command::Signature { .. } => "signature",
        Command::Compare { .. } => "compare",
        Command::AppendixCheck { .. } => "appendix-check",
    }
}

/// Runs a parsed command line and renders its report.
pub fn run(cli: &Cli) -> (String, Outcome) {
    let result = match &cli.command {
        Command::Dims { n, kind, kmax } => dims(*n, kind, *kmax),
        Command::OrbitDim { n, kind, kmax } => orbit_dim(cli, *n, kind, *kmax),
        Command::Hilbert { n, kind, kmax } => hilbert(cli, *n, kind, *kmax),
        Command::Poincare { n, kind, kmax } => poincare(cli, *n, kind, *kmax),
        Command::Verify { n, class } => verify(cli, *n, class),
        Command::Catalog { n, class } => list_catalog(*n, class.as_deref()),
        Command::Classify { file } => classify(file),
        Command::Signature { file, count } => sample(cli, file, *count),
        Command::Compare { a, b, tol } => compare(cli, a, b, *tol),
        Command::AppendixCheck { level } => appendix(level),
    };
    let mut doc = Map::new();
    doc.insert("schema".into(), json!(SCHEMA));
    doc.insert("command".into(), json!(command_name(&cli.command)));
    let (outcome, text) = match result {
        Ok(r) => {
            doc.insert("ok".into(), json!(r.ok));
            doc.extend(r.fields);
            (if r.ok { Outcome::Pass } else { Outcome::Fail }, r.text)
        }
        Err(CliError::Malformed(m)) => {
            doc.insert("ok".into(), json!(false));
            doc.insert("error".into(), json!(m));
            (Outcome::Malformed, None)
        }
        Err(CliError::Failed(m)) => {
            doc.insert("ok".into(), json!(false));
            doc.insert("error".into(), json!(m));
            (Outcome::Fail, None)
        }
    };
    let rendered = match (cli.format, text) {
        (Format::Text, Some(t)) => t,
        _ => serde_json::to_string_pretty(&Value::Object(doc)).expect("report serializes"),
    };
    (rendered, outcome)
}

fn eq_kind(kind: &str) -> std::result::Result<EqKind, CliError> {
    EqKind::parse(kind).ok_or_else(|| CliError::Malformed(format!("unknown kind '{kind}' (expected E or ED)")))
}

fn equation(n: usize, kind: &str) -> std::result::Result<EquationSystem, CliError> {
    Ok(EquationSystem::new(eq_kind(kind)?, n)?)
}

fn class(name: &str) -> std::result::Result<Class, CliError> {
    Class::parse(name).ok_or_else(|| CliError::Malformed(format!("unknown class '{name}' (expected general or degenerate)")))
}

fn seed(cli: &Cli) -> u64 {
    cli.seed.unwrap_or(0)
}

fn rank_allowed(cli: &Cli, n: usize) -> bool {
    n < 5 || cli.slow
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate() {
            w[i] = w[i].max(c.len());
        }
    }
    let line = |cells: Vec<&str>| cells.iter().enumerate().map(|(i, c)| format!("{c:<w$}", w = w[i])).collect::<Vec<_>>().join("  ");
    let mut out = vec![line(header.to_vec())];
    out.extend(rows.iter().map(|r| line(r.iter().map(String::as_str).collect())));
    out.join("\n")
}

fn opt(v: Option<i64>) -> String {
    v.map_or("-".into(), |x| x.to_string())
}

fn dims(n: usize, kind: &str, kmax: u32) -> CmdResult {
    let eq = equation(n, kind)?;
    let rows: Vec<(u32, i64, i64)> = (0..=kmax).map(|k| (k, eq.dim_enumerated(k) as i64, eq.dim(k))).collect();
    let ok = rows.iter().all(|r| r.1 == r.2);
    let text = table(
        &["k", "computed", "closed_form", "match"],
        &rows.iter().map(|r| vec![r.0.to_string(), r.1.to_string(), r.2.to_string(), (r.1 == r.2).to_string()]).collect::<Vec<_>>(),
    );
    let json_rows: Vec<Value> =
        rows.iter().map(|&(k, c, f)| json!({"n": n, "k": k, "kind": eq.kind.name(), "computed": c, "closed_form": f, "match": c == f})).collect();
    Ok(Report::new(ok, json!({"n": n, "kind": eq.kind.name(), "rows": json_rows})).with_text(text))
}

fn orbit_dim(cli: &Cli, n: usize, kind: &str, kmax: u32) -> CmdResult {
    let eq = equation(n, kind)?;
    let compute = rank_allowed(cli, n);
    let mut rows = Vec::new();
    let mut text_rows = Vec::new();
    let mut ok = true;
    for k in 0..=kmax {
        let closed = orbit_dim_closed_form(eq.kind, n, k);
        let (computed, warning) = if compute {
            let r = pseudogroup::orbit_dimension(&eq, k, seed(cli).wrapping_add(k as u64))?;
            (Some(r.rank as i64), r.warning)
        } else {
            (None, None)
        };
        let m = computed.is_none_or(|c| c == closed);
        ok &= m;
        text_rows.push(vec![k.to_string(), opt(computed), closed.to_string(), m.to_string()]);
        rows.push(json!({"n": n, "k": k, "kind": eq.kind.name(), "computed": computed, "closed_form": closed, "match": m, "warning": warning}));
    }
    let stab_closed = pseudogroup::stabilizer_closed_form(n);
    let stab = if compute { Some(pseudogroup::stabilizer_dimension_1jet(n, seed(cli))?) } else { None };
    let stab_ok = stab.is_none_or(|s| s == stab_closed);
    ok &= stab_ok;
    let text = format!(
        "{}\nstabilizer of a generic 1-jet: computed {} closed_form {} match {}",
        table(&["k", "computed", "closed_form", "match"], &text_rows),
        stab.map_or("-".into(), |s| s.to_string()),
        stab_closed,
        stab_ok
    );
    Ok(Report::new(
        ok,
        json!({"n": n, "kind": eq.kind.name(), "rows": rows,
               "stabilizer": {"computed": stab, "closed_form": stab_closed, "match": stab_ok}}),
    )
    .with_text(text))
}

/// `H_k` for `k = 0..=kmax` by exact rank, or `None` when ranks are not allowed.
fn computed_hilbert(cli: &Cli, eq: &EquationSystem, kmax: u32) -> std::result::Result<Option<Vec<pseudogroup::CountReport>>, CliError> {
    if !rank_allowed(cli, eq.n()) {
        return Ok(None);
    }
    Ok(Some(pseudogroup::hilbert(eq, kmax, seed(cli))?))
}

fn hilbert(cli: &Cli, n: usize, kind: &str, kmax: u32) -> CmdResult {
    let eq = equation(n, kind)?;
    let computed = computed_hilbert(cli, &eq, kmax)?;
    let mut rows = Vec::new();
    let mut text_rows = Vec::new();
    let mut ok = true;
    for k in 0..=kmax {
        let closed = hilbert_closed_form(eq.kind, n, k);
        let row = computed.as_ref().map(|c| &c[k as usize]);
        let h = row.map(|r| r.hilbert);
        let m = h.is_none_or(|h| h == closed);
        ok &= m;
        text_rows.push(vec![k.to_string(), opt(h), closed.to_string(), m.to_string()]);
        rows.push(json!({
            "n": n, "k": k, "kind": eq.kind.name(), "computed": h, "closed_form": closed, "match": m,
            "dim": eq.dim(k), "orbit_dim": row.map(|r| r.orbit_dim), "codim": row.map(|r| r.codim),
            "warning": row.and_then(|r| r.warning.clone()),
        }));
    }
    Ok(Report::new(ok, json!({"n": n, "kind": eq.kind.name(), "rank_checked": computed.is_some(), "rows": rows}))
        .with_text(table(&["k", "computed", "closed_form", "match"], &text_rows)))
}

fn poincare(cli: &Cli, n: usize, kind: &str, kmax: u32) -> CmdResult {
    let eq = equation(n, kind)?;
    let series = pseudogroup::poincare_series(eq.kind, n, kmax)
        .ok_or_else(|| CliError::Malformed(format!("no Poincaré function for {} with n = {n}", eq.kind)))?;
    let (num, d) = pseudogroup::poincare_rational(eq.kind, n).expect("series exists");
    let computed = computed_hilbert(cli, &eq, kmax)?;
    let mut rows = Vec::new();
    let mut text_rows = Vec::new();
    let mut ok = true;
    for k in 0..=kmax {
        let closed = hilbert_closed_form(eq.kind, n, k);
        let h = computed.as_ref().map(|c| c[k as usize].hilbert);
        let target = h.unwrap_or(closed);
        let m = series[k as usize] == target;
        ok &= m;
        text_rows.push(vec![k.to_string(), series[k as usize].to_string(), opt(h), closed.to_string(), m.to_string()]);
        rows.push(json!({"n": n, "k": k, "kind": eq.kind.name(), "series": series[k as usize], "computed": h, "closed_form": closed, "match": m}));
    }
    Ok(Report::new(ok, json!({"n": n, "kind": eq.kind.name(), "numerator": num, "denominator_power": d, "rows": rows}))
        .with_text(table(&["k", "series", "computed", "closed_form", "match"], &text_rows)))
}

fn env_number<T: std::str::FromStr>(name: &str) -> std::result::Result<Option<T>, CliError> {
    match std::env::var(name) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| CliError::Malformed(format!("{name} is not a number: '{v}'"))),
        Err(_) => Ok(None),
    }
}

fn method_name(m: Method) -> String {
    match m {
        Method::Symbolic => "symbolic".into(),
        Method::Sampled { points } => format!("sampled({points})"),
    }
}

fn invariance_json(r: &InvarianceReport, order: u32) -> Value {
    json!({
        "name": r.name, "kind": r.kind.name(), "order": order, "invariant": r.invariant,
        "expected": r.as_expected(), "method": method_name(r.method), "residual": r.residual,
    })
}

fn verify(cli: &Cli, n: usize, class_name: &str) -> CmdResult {
    let class = class(class_name)?;
    let budget = env_number::<u64>(BUDGET_ENV)?.map(Duration::from_secs);
    let points = env_number::<usize>(RETRIES_ENV)?;
    let mut opts = VerifyOptions::default();
    if let Some(s) = cli.seed {
        opts.seed = s;
    }
    if let Some(p) = points {
        opts.points = p.max(1);
    }
    let fixtures: Vec<_> = catalog::fixtures().iter().filter(|f| f.n == n && f.class == class).collect();
    if fixtures.is_empty() {
        return Err(CliError::Malformed(format!("no catalog entries for n = {n}, {class}")));
    }
    let start = Instant::now();
    let mut entries = Vec::new();
    let mut text_rows = Vec::new();
    let mut ok = true;
    for f in fixtures {
        let mut o = opts;
        // past the budget everything left is checked at sample points
        if budget.is_some_and(|b| start.elapsed() > b) {
            o.symbolic_size_limit = 0;
        }
        let entry = match catalog::build(&f.name, n, class) {
            Ok(e) => e,
            Err(e) => {
                ok = false;
                entries.push(json!({"name": f.name, "kind": f.kind.name(), "order": f.order, "expected": false, "error": e.to_string()}));
                text_rows.push(vec![f.name.clone(), f.kind.name().into(), f.order.to_string(), "-".into(), "error".into()]);
                continue;
            }
        };
        let r = catalog::verify_invariance_with(&entry, o)?;
        ok &= r.as_expected();
        text_rows.push(vec![r.name.clone(), r.kind.name().into(), f.order.to_string(), method_name(r.method), if r.as_expected() { "pass" } else { "FAIL" }.into()]);
        entries.push(invariance_json(&r, f.order));
    }
    Ok(Report::new(ok, json!({"n": n, "class": class.name(), "entries": entries}))
        .with_text(table(&["entry", "kind", "order", "method", "result"], &text_rows)))
}

fn list_catalog(n: Option<usize>, class_name: Option<&str>) -> CmdResult {
    let class = class_name.map(class).transpose()?;
    let mut entries = Vec::new();
    let mut text_rows = Vec::new();
    for f in catalog::fixtures() {
        if n.is_some_and(|n| n != f.n) || class.is_some_and(|c| c != f.class) {
            continue;
        }
        let source = match &f.source {
            Source::Text(_) => "formula".to_string(),
            Source::Construct(c) => format!("construct: {c}"),
        };
        text_rows.push(vec![f.name.clone(), f.n.to_string(), f.class.name().into(), f.kind.name().into(), f.order.to_string(), f.role.clone().unwrap_or_default()]);
        entries.push(json!({
            "name": f.name, "n": f.n, "class": f.class.name(), "kind": f.kind.name(), "order": f.order,
            "role": f.role, "note": f.note, "source": source,
        }));
    }
    Ok(Report::new(true, json!({"entries": entries})).with_text(table(&["entry", "n", "class", "kind", "order", "role"], &text_rows)))
}

fn load(path: &Path) -> std::result::Result<MetricSection, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))?;
    MetricSection::parse(&text).map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))
}

fn classify(path: &Path) -> CmdResult {
    let s = load(path)?;
    let c = signature::classify(&s);
    Ok(Report::new(true, json!({"file": path.display().to_string(), "n": s.n(), "class": c})).with_text(c.to_string()))
}

fn sample(cli: &Cli, path: &Path, count: Option<usize>) -> CmdResult {
    let mut s = load(path)?;
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(c) = count {
        s.count = c;
    }
    let class = signature::classify(&s);
    let (_, cloud) = signature::sample_section(&s)?;
    let mut fields = json!({"file": path.display().to_string(), "n": s.n(), "class": class});
    if let (Value::Object(m), Value::Object(c)) = (&mut fields, serde_json::to_value(&cloud).expect("cloud serializes")) {
        m.extend(c);
    }
    Ok(Report::new(true, fields))
}

fn compare(cli: &Cli, a: &Path, b: &Path, tol: f64) -> CmdResult {
    let mut sa = load(a)?;
    let mut sb = load(b)?;
    if let Some(seed) = cli.seed {
        sa.seed = seed;
        sb.seed = seed.wrapping_add(1);
    }
    let (ca, cb) = (signature::classify(&sa), signature::classify(&sb));
    let base = json!({"a": a.display().to_string(), "b": b.display().to_string(), "class_a": ca, "class_b": cb, "tol": tol});
    let mut fields = base.as_object().cloned().expect("object");
    if sa.n() != sb.n() || ca != cb {
        // dimension and class are invariant, so no sampling is needed
        fields.insert("verdict".into(), json!(Verdict::Distinct));
        fields.insert("reason".into(), json!(if sa.n() != sb.n() { "dimensions differ" } else { "classes differ" }));
        return Ok(Report::new(true, Value::Object(fields)));
    }
    let (ma, cla) = signature::sample_section(&sa)?;
    let (mb, clb) = signature::sample_section(&sb)?;
    let r = signature::compare((&ma, &cla), (&mb, &clb), tol)?;
    if let Value::Object(m) = serde_json::to_value(&r).expect("report serializes") {
        fields.extend(m);
    }
    fields.insert("generators".into(), json!(cla.generators));
    let text = format!("{:?} (max distance {:.3e}, tol {:.1e})", r.verdict, r.max_distance, tol);
    Ok(Report::new(true, Value::Object(fields)).with_text(text))
}

fn appendix(level: &str) -> CmdResult {
    let q = symexpr::parse(level)
        .ok()
        .and_then(|e| e.constant_value())
        .filter(|q| !q.is_zero())
        .ok_or_else(|| CliError::Malformed(format!("level must be a nonzero rational, got '{level}'")))?;
    let r = appendix_quotient_check(q)?;
    let ok = r.all_ok();
    Ok(Report::new(
        ok,
        json!({
            "level": r.level.to_string(),
            "bracket_v1_v2_is_minus_v2": r.bracket_ok,
            "v2_z4_zero": r.v2_z4_zero,
            "v2_z6_zero": r.v2_z6_zero,
            "v1_z6_zero": r.v1_z6_zero,
            "z4_weight": r.z4_weight.as_ref().map(|w| w.to_string()),
            "v2_linear_kernel_dim": r.v2_linear_kernel_dim,
            "v2_kernel_is_z4_z6": r.v2_kernel_is_z4_z6,
            "fiber_dim": r.fiber_dim,
            "group_dim": r.group_dim,
            "translation_dim": r.translation_dim,
            "translations_match": r.translations_match,
            "printed_span_matches": r.printed_span_matches,
            "derived_span_matches": r.derived_span_matches,
            "derived_bracket_ok": r.derived_bracket_ok,
        }),
    ))
}
