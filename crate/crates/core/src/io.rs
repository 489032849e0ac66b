//! File formats: dataset CSV, function-grid CSV, fit artifacts, truth
//! sidecars, identification reports, and Monte Carlo reports.
//!
//! All writers go through a temp-file-plus-rename so a crash never leaves a
//! half-written artifact. Floats are printed with Rust's shortest
//! round-trip formatting, so read-after-write is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::identification::IdentificationResult;
use crate::model::{ComponentFunction, FitDiagnostics, TimeSeriesDataset, VcamFit};
use crate::simulation::{MonteCarloReport, TruthHandle};
use crate::splines::SplineBasis;

/// Writes `contents` to `path` atomically (temp file in the same directory,
/// then rename).
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp{}",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
            std::process::id()
        )),
        None => Path::new(&format!(".out.tmp{}", std::process::id())).to_path_buf(),
    };
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("invalid number for {what}: {s:?}")))
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| Error::Parse(format!("invalid integer for {what}: {s:?}")))
}

/// Serializes a dataset with header `t,y,x1,...,xp`, one row per
/// observation, t = 1..T in order.
pub fn dataset_to_csv(data: &TimeSeriesDataset) -> String {
    let p = data.covariate_count();
    let mut s = String::from("t,y");
    for k in 1..=p {
        let _ = write!(s, ",x{k}");
    }
    s.push('\n');
    for t in 0..data.len() {
        let _ = write!(s, "{},{}", t + 1, data.y[t]);
        for k in 0..p {
            let _ = write!(s, ",{}", data.x[(t, k)]);
        }
        s.push('\n');
    }
    s
}

pub fn write_dataset_csv(path: &Path, data: &TimeSeriesDataset) -> Result<()> {
    write_atomic(path, &dataset_to_csv(data))
}

pub fn dataset_from_csv(text: &str) -> Result<TimeSeriesDataset> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty dataset file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "t" || cols[1] != "y" {
        return Err(Error::Parse(format!(
            "dataset header must be t,y,x1,...,xp; got {header:?}"
        )));
    }
    let p = cols.len() - 2;
    for (k, c) in cols[2..].iter().enumerate() {
        let expect = format!("x{}", k + 1);
        if *c != expect {
            return Err(Error::Parse(format!(
                "dataset header column {} should be {expect}, got {c:?}",
                k + 3
            )));
        }
    }
    let mut y = Vec::new();
    let mut x: Vec<Vec<f64>> = vec![Vec::new(); p];
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != p + 2 {
            return Err(Error::Parse(format!(
                "row {}: expected {} fields, got {}",
                i + 1,
                p + 2,
                fields.len()
            )));
        }
        let t = parse_usize(fields[0], "t")?;
        if t != i + 1 {
            return Err(Error::Parse(format!(
                "row {}: t column must be sequential starting at 1, got {t}",
                i + 1
            )));
        }
        y.push(parse_f64(fields[1], "y")?);
        for k in 0..p {
            x[k].push(parse_f64(fields[k + 2], &format!("x{}", k + 1))?);
        }
    }
    TimeSeriesDataset::new(y, x)
}

pub fn read_dataset_csv(path: &Path) -> Result<TimeSeriesDataset> {
    dataset_from_csv(&fs::read_to_string(path)?)
}

/// Function-grid CSV with header `x,value`.
pub fn grid_to_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("x,value\n");
    for (x, v) in points {
        let _ = writeln!(s, "{x},{v}");
    }
    s
}

pub fn write_grid_csv(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    write_atomic(path, &grid_to_csv(points))
}

fn floats_line(label: &str, values: impl Iterator<Item = f64>) -> String {
    let mut s = String::from(label);
    for v in values {
        let _ = write!(s, " {v}");
    }
    s.push('\n');
    s
}

fn component_block(f: &ComponentFunction) -> String {
    let mut s = String::new();
    match f.anchor {
        Some(a) => {
            let _ = writeln!(
                s,
                "component additive order {} interior {} anchor {a}",
                f.basis.order(),
                f.basis.interior_count()
            );
        }
        None => {
            let _ = writeln!(
                s,
                "component varying order {} interior {}",
                f.basis.order(),
                f.basis.interior_count()
            );
        }
    }
    s.push_str(&floats_line("knots", f.basis.knots().iter().cloned()));
    s.push_str(&floats_line("coeffs", f.coeffs.iter().cloned()));
    s
}

/// Serializes a fitted model as line-oriented structured text: diagnostics,
/// normalization scales, then one block per component function with its
/// basis knots and coefficients.
pub fn fit_to_text(fit: &VcamFit) -> String {
    let mut s = String::from("vcam-fit v1\n");
    let d = &fit.diagnostics;
    let _ = writeln!(s, "segment_length {}", d.segment_length);
    let _ = writeln!(s, "interior_knots {}", d.interior_knots);
    let _ = writeln!(s, "rss {}", d.rss);
    let _ = writeln!(s, "rank_warnings {}", d.rank_warnings);
    s.push_str(&floats_line("scales", fit.scales.iter().cloned()));
    let _ = writeln!(s, "alpha {}", fit.alpha.len());
    for f in &fit.alpha {
        s.push_str(&component_block(f));
    }
    let _ = writeln!(s, "beta {}", fit.beta.len());
    for f in &fit.beta {
        s.push_str(&component_block(f));
    }
    s
}

pub fn write_fit(path: &Path, fit: &VcamFit) -> Result<()> {
    write_atomic(path, &fit_to_text(fit))
}

struct LineReader<'a> {
    lines: std::iter::Peekable<std::str::Lines<'a>>,
    at: usize,
}

impl<'a> LineReader<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().peekable(),
            at: 0,
        }
    }

    fn next(&mut self) -> Result<&'a str> {
        loop {
            self.at += 1;
            match self.lines.next() {
                Some(l) if l.trim().is_empty() => continue,
                Some(l) => return Ok(l.trim()),
                None => return Err(Error::Parse(format!("unexpected end of file at line {}", self.at))),
            }
        }
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next()?;
        line.strip_prefix(key)
            .filter(|rest| rest.starts_with(' ') || rest.is_empty())
            .map(str::trim)
            .ok_or_else(|| Error::Parse(format!("expected line starting with {key:?}, got {line:?}")))
    }

    fn keyed_floats(&mut self, key: &str) -> Result<Vec<f64>> {
        self.keyed(key)?
            .split_whitespace()
            .map(|v| parse_f64(v, key))
            .collect()
    }
}

fn parse_component(r: &mut LineReader) -> Result<ComponentFunction> {
    let head = r.keyed("component")?;
    let tokens: Vec<&str> = head.split_whitespace().collect();
    let kind = tokens
        .first()
        .ok_or_else(|| Error::Parse("component line missing kind".into()))?;
    let mut order = None;
    let mut interior = None;
    let mut anchor = None;
    for pair in tokens[1..].chunks(2) {
        let value = pair.get(1).copied().unwrap_or("");
        match pair[0] {
            "order" => order = Some(parse_usize(value, "order")?),
            "interior" => interior = Some(parse_usize(value, "interior")?),
            "anchor" => anchor = Some(parse_f64(value, "anchor")?),
            other => return Err(Error::Parse(format!("unknown component attribute {other:?}"))),
        }
    }
    let order = order.ok_or_else(|| Error::Parse("component missing order".into()))?;
    let interior = interior.ok_or_else(|| Error::Parse("component missing interior".into()))?;
    let knots = r.keyed_floats("knots")?;
    let coeffs = r.keyed_floats("coeffs")?;
    let basis = SplineBasis::from_parts(order, interior, knots)?;
    if coeffs.len() != basis.dim() {
        return Err(Error::Parse(format!(
            "component has {} coefficients but the basis dimension is {}",
            coeffs.len(),
            basis.dim()
        )));
    }
    let coeffs = DVector::from_vec(coeffs);
    match (*kind, anchor) {
        ("varying", None) => Ok(ComponentFunction::varying(basis, coeffs)),
        ("additive", Some(a)) => Ok(ComponentFunction::additive(basis, coeffs, a)),
        ("additive", None) => Err(Error::Parse("additive component missing anchor".into())),
        ("varying", Some(_)) => Err(Error::Parse("varying component must not carry an anchor".into())),
        (other, _) => Err(Error::Parse(format!("unknown component kind {other:?}"))),
    }
}

pub fn fit_from_text(text: &str) -> Result<VcamFit> {
    let mut r = LineReader::new(text);
    let magic = r.next()?;
    if magic != "vcam-fit v1" {
        return Err(Error::Parse(format!("not a fit artifact: first line {magic:?}")));
    }
    let segment_length = parse_usize(r.keyed("segment_length")?, "segment_length")?;
    let interior_knots = parse_usize(r.keyed("interior_knots")?, "interior_knots")?;
    let rss = parse_f64(r.keyed("rss")?, "rss")?;
    let rank_warnings = parse_usize(r.keyed("rank_warnings")?, "rank_warnings")?;
    let scales = r.keyed_floats("scales")?;
    let n_alpha = parse_usize(r.keyed("alpha")?, "alpha count")?;
    let mut alpha = Vec::with_capacity(n_alpha);
    for _ in 0..n_alpha {
        alpha.push(parse_component(&mut r)?);
    }
    let n_beta = parse_usize(r.keyed("beta")?, "beta count")?;
    let mut beta = Vec::with_capacity(n_beta);
    for _ in 0..n_beta {
        beta.push(parse_component(&mut r)?);
    }
    if n_alpha != n_beta + 1 {
        return Err(Error::Parse(format!(
            "fit artifact has {n_alpha} alpha blocks but {n_beta} beta blocks"
        )));
    }
    Ok(VcamFit {
        alpha,
        beta,
        scales,
        diagnostics: FitDiagnostics {
            rss,
            segment_length,
            interior_knots,
            rank_warnings,
        },
    })
}

pub fn read_fit(path: &Path) -> Result<VcamFit> {
    fit_from_text(&fs::read_to_string(path)?)
}

/// Truth sidecar written next to a simulated dataset: the structural truth
/// masks and the stored noise sequence, enough to rebuild y exactly given
/// the example's analytic component functions.
pub fn truth_to_text(truth: &TruthHandle, example: &str, t: usize, seed: u64, stream: u64) -> String {
    let mut s = String::from("vcam-truth v1\n");
    let _ = writeln!(s, "example {example}");
    let _ = writeln!(s, "t {t}");
    let _ = writeln!(s, "seed {seed}");
    let _ = writeln!(s, "stream {stream}");
    let mask = |m: &[bool]| {
        m.iter()
            .map(|&b| if b { "1" } else { "0" })
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(s, "alpha_constant {}", mask(&truth.alpha_constant));
    let _ = writeln!(s, "beta_linear {}", mask(&truth.beta_linear));
    s.push_str(&floats_line("noise", truth.noise.iter().cloned()));
    s
}

/// Identification report: chosen penalties, flagged counts, per-term flags
/// and the final derivative norms the flags were judged on.
pub fn identification_to_text(
    result: &IdentificationResult,
    alpha_deriv_norms: &[f64],
    beta_curv_norms: &[f64],
) -> String {
    let mut s = String::from("vcam-identify v1\n");
    let _ = writeln!(s, "lambda {}", result.lambda);
    let _ = writeln!(s, "mu {}", result.mu);
    let _ = writeln!(s, "d1 {}", result.d1);
    let _ = writeln!(s, "d2 {}", result.d2);
    let _ = writeln!(s, "stage1_converged {}", result.stage1_converged);
    let _ = writeln!(s, "stage2_converged {}", result.stage2_converged);
    for (k, (&flag, &norm)) in result
        .alpha_constant
        .iter()
        .zip(alpha_deriv_norms)
        .enumerate()
    {
        let _ = writeln!(
            s,
            "alpha{} constant {} deriv_norm {norm}",
            k + 1,
            if flag { 1 } else { 0 }
        );
    }
    for (k, (&flag, &norm)) in result.beta_linear.iter().zip(beta_curv_norms).enumerate() {
        let _ = writeln!(
            s,
            "beta{} linear {} curvature_norm {norm}",
            k + 1,
            if flag { 1 } else { 0 }
        );
    }
    s
}

fn fmt_stat(s: Option<crate::simulation::MiseStat>) -> (String, String) {
    match s {
        Some(v) => (v.mean.to_string(), v.sd.to_string()),
        None => (String::new(), String::new()),
    }
}

/// Machine-readable Monte Carlo report. Deliberately excludes wall-clock
/// time so identical configurations produce byte-identical files.
pub fn mc_report_to_csv(r: &MonteCarloReport) -> String {
    let mut s = String::from("section,name,field,mean,sd\n");
    let _ = writeln!(s, "meta,t,,{},", r.t);
    let _ = writeln!(s, "meta,replications,,{},", r.replications);
    let _ = writeln!(s, "meta,completed,,{},", r.completed);
    let _ = writeln!(s, "meta,failures,,{},", r.failures);
    for (i, name) in r.function_names.iter().enumerate() {
        let three = r.three_step[i];
        let _ = writeln!(s, "mise,{name},three_step,{},{}", three.mean, three.sd);
        for (label, col) in [
            ("penalized", &r.penalized),
            ("oracle", &r.oracle),
            ("misspecified_vc", &r.misspecified_vc),
            ("misspecified_additive", &r.misspecified_additive),
        ] {
            let (m, sd) = fmt_stat(col[i]);
            if !m.is_empty() {
                let _ = writeln!(s, "mise,{name},{label},{m},{sd}");
            }
        }
    }
    for (label, counts) in [
        ("additive_terms", r.additive_terms),
        ("varying_terms", r.varying_terms),
        ("true_model", r.true_model),
    ] {
        if let Some(c) = counts {
            let _ = writeln!(s, "counts,{label},correct,{},", c.correct);
            let _ = writeln!(s, "counts,{label},over,{},", c.over);
            let _ = writeln!(s, "counts,{label},under,{},", c.under);
        }
    }
    for &(v, n) in &r.chosen_i {
        let _ = writeln!(s, "chosen,i,{v},{n},");
    }
    for &(v, n) in &r.chosen_k {
        let _ = writeln!(s, "chosen,k,{v},{n},");
    }
    for &l in &r.chosen_lambda {
        let _ = writeln!(s, "chosen,lambda,,{l},");
    }
    for &m in &r.chosen_mu {
        let _ = writeln!(s, "chosen,mu,,{m},");
    }
    s
}

/// Human-readable summary table for a Monte Carlo run.
pub fn mc_report_to_table(r: &MonteCarloReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "Monte Carlo report: T = {}, replications = {} ({} completed, {} failed), {:.1}s",
        r.t, r.replications, r.completed, r.failures, r.wall_clock_secs
    );
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<10} {:>22} {:>22} {:>22} {:>22} {:>22}",
        "function", "three-step", "penalized", "oracle", "misspec-VC", "misspec-additive"
    );
    let cell = |st: Option<crate::simulation::MiseStat>| match st {
        Some(v) => format!("{:.4} ({:.4})", v.mean, v.sd),
        None => "-".to_string(),
    };
    for (i, name) in r.function_names.iter().enumerate() {
        let _ = writeln!(
            s,
            "{:<10} {:>22} {:>22} {:>22} {:>22} {:>22}",
            name,
            cell(Some(r.three_step[i])),
            cell(r.penalized[i]),
            cell(r.oracle[i]),
            cell(r.misspecified_vc[i]),
            cell(r.misspecified_additive[i]),
        );
    }
    let _ = writeln!(s);
    for (label, c) in [
        ("additive terms", r.additive_terms),
        ("varying-coef terms", r.varying_terms),
        ("true model", r.true_model),
    ] {
        if let Some(c) = c {
            let _ = writeln!(
                s,
                "{label:<24} correct {:>4}  over {:>4}  under {:>4}",
                c.correct, c.over, c.under
            );
        }
    }
    if !r.chosen_i.is_empty() {
        let hist = |h: &[(usize, usize)]| {
            h.iter()
                .map(|(v, n)| format!("{v}:{n}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(s);
        let _ = writeln!(s, "chosen I histogram: {}", hist(&r.chosen_i));
        let _ = writeln!(s, "chosen K histogram: {}", hist(&r.chosen_k));
    }
    s
}
