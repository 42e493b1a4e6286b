//! Report assembly and rendering. Every printed number is the corresponding
//! library value, formatted once here.

use serde::{Deserialize, Serialize};
use streamstat_core::ee::{wald_coefs, wald_global, WaldTest};
use streamstat_core::lm::AnovaTable;
use streamstat_core::Matrix;

use crate::error::CliError;
use crate::snapshot::{EngineSnapshot, StreamSnapshot};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefRow {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalReport {
    pub model: String,
    pub n_total: usize,
    pub chunks_seen: usize,
    pub singular: bool,
    pub separation_merges: usize,
    pub unresolved_separation: bool,
    /// "t" for the linear model, "z" for the EE estimators.
    pub statistic_label: String,
    /// The ridge warm start was never removed; estimates are still biased.
    pub ridge_active: bool,
    pub coefficients: Option<Vec<CoefRow>>,
    pub anova: Option<AnovaTable>,
    pub global_wald: Option<WaldTest>,
}

/// Column names recovered from the snapshot's schema fingerprint.
pub fn column_names(fingerprint: &str) -> (Vec<String>, bool) {
    let mut parts = fingerprint.split('|');
    let _response = parts.next().unwrap_or_default();
    let covs = parts.next().unwrap_or_default();
    let intercept = parts
        .next()
        .map(|s| s.ends_with("true"))
        .unwrap_or(false);
    let mut names = Vec::new();
    if intercept {
        names.push("(Intercept)".to_string());
    }
    for c in covs.split(',').filter(|c| !c.is_empty()) {
        names.push(c.to_string());
    }
    (names, intercept)
}

fn default_slope_contrast(p: usize, intercept: bool) -> Option<Matrix> {
    if intercept && p > 1 {
        let mut c = Matrix::zeros(p - 1, p);
        for j in 1..p {
            c.set(j - 1, j, 1.0);
        }
        Some(c)
    } else {
        None
    }
}

pub fn build_report(snapshot: &StreamSnapshot) -> Result<FinalReport, CliError> {
    let (names, intercept) = column_names(&snapshot.schema_fingerprint);
    let name_of = |j: usize| {
        names
            .get(j)
            .cloned()
            .unwrap_or_else(|| format!("x{}", j + 1))
    };
    match &snapshot.engine {
        EngineSnapshot::Lm { state } => {
            let mut report = FinalReport {
                model: "lm".into(),
                n_total: state.n_total(),
                chunks_seen: snapshot.chunks_seen,
                singular: snapshot.singular,
                separation_merges: 0,
                unresolved_separation: false,
                statistic_label: "t".into(),
                ridge_active: state.ridge().map(|r| r.active).unwrap_or(false),
                coefficients: None,
                anova: None,
                global_wald: None,
            };
            if !state.is_deferred() && state.n_total() > state.p() {
                let coef = state.coef_t_tests()?;
                report.coefficients = Some(
                    coef.iter()
                        .enumerate()
                        .map(|(j, c)| CoefRow {
                            name: name_of(j),
                            estimate: c.estimate,
                            se: c.se,
                            statistic: c.t,
                            p_value: c.p_value,
                        })
                        .collect(),
                );
                if intercept {
                    report.anova = Some(state.anova()?);
                }
            }
            Ok(report)
        }
        EngineSnapshot::Cee { state } => {
            let mut report = FinalReport {
                model: "cee".into(),
                n_total: state.n_total(),
                chunks_seen: snapshot.chunks_seen,
                singular: snapshot.singular,
                separation_merges: snapshot.separation_merges,
                unresolved_separation: snapshot.unresolved_separation,
                statistic_label: "z".into(),
                ridge_active: false,
                coefficients: None,
                anova: None,
                global_wald: None,
            };
            if let (Some(beta), Some(v)) = (state.beta(), state.v()) {
                report.coefficients = Some(coef_rows_from(beta, v, &name_of));
                if let Some(c) = default_slope_contrast(state.p(), intercept) {
                    report.global_wald = Some(wald_global(beta, v, &c)?);
                }
            }
            Ok(report)
        }
        EngineSnapshot::Cuee { state } => {
            let mut report = FinalReport {
                model: "cuee".into(),
                n_total: state.n_total(),
                chunks_seen: snapshot.chunks_seen,
                singular: snapshot.singular,
                separation_merges: snapshot.separation_merges,
                unresolved_separation: snapshot.unresolved_separation,
                statistic_label: "z".into(),
                ridge_active: false,
                coefficients: None,
                anova: None,
                global_wald: None,
            };
            if let (Some(beta), Some(v)) = (state.beta_tilde(), state.v_tilde()) {
                report.coefficients = Some(coef_rows_from(beta, v, &name_of));
                if let Some(c) = default_slope_contrast(state.p(), intercept) {
                    report.global_wald = Some(wald_global(beta, v, &c)?);
                }
            }
            Ok(report)
        }
    }
}

fn coef_rows_from(
    beta: &[f64],
    v: &Matrix,
    name_of: &impl Fn(usize) -> String,
) -> Vec<CoefRow> {
    wald_coefs(beta, v)
        .into_iter()
        .enumerate()
        .map(|(j, c)| CoefRow {
            name: name_of(j),
            estimate: c.estimate,
            se: c.se,
            statistic: c.z,
            p_value: c.p_value,
        })
        .collect()
}

pub fn render_coefficients(report: &FinalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "model: {}   n = {}   accumulation points = {}\n",
        report.model, report.n_total, report.chunks_seen
    ));
    if report.separation_merges > 0 {
        out.push_str(&format!(
            "separation: {} chunk merge(s){}\n",
            report.separation_merges,
            if report.unresolved_separation {
                " (unresolved at end of input)"
            } else {
                ""
            }
        ));
    }
    match &report.coefficients {
        Some(rows) => {
            let label = &report.statistic_label;
            out.push_str(&format!(
                "{:<16} {:>14} {:>12} {:>10} {:>12}\n",
                "term", "estimate", "se", label, "p"
            ));
            for r in rows {
                out.push_str(&format!(
                    "{:<16} {:>14.6} {:>12.6} {:>10.4} {:>12.4e}\n",
                    r.name, r.estimate, r.se, r.statistic, r.p_value
                ));
            }
        }
        None => {
            out.push_str(
                "coefficients unavailable: needs more observations than parameters and a full-rank cumulative design\n",
            );
        }
    }
    if report.singular {
        out.push_str("warning: estimates deferred (singular cumulative design)\n");
    }
    if report.ridge_active {
        out.push_str("note: ridge warm start still active; estimates carry the ridge bias\n");
    }
    out
}

pub fn render_anova(report: &FinalReport) -> String {
    let mut out = String::new();
    match &report.anova {
        Some(t) => {
            out.push_str(&format!(
                "{:<12} {:>6} {:>14} {:>14} {:>10} {:>12}\n",
                "source", "df", "SS", "MS", "F", "p"
            ));
            out.push_str(&format!(
                "{:<12} {:>6} {:>14.6} {:>14} {:>10} {:>12}\n",
                "regression",
                t.df_regression,
                t.ss_regression,
                t.ms_regression
                    .map(|v| format!("{v:.6}"))
                    .unwrap_or_else(|| "-".into()),
                t.f_statistic
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "-".into()),
                t.p_value
                    .map(|v| format!("{v:.4e}"))
                    .unwrap_or_else(|| "-".into()),
            ));
            out.push_str(&format!(
                "{:<12} {:>6} {:>14.6} {:>14.6}\n",
                "error", t.df_error, t.ss_error, t.ms_error
            ));
            out.push_str(&format!(
                "{:<12} {:>6} {:>14.6}\n",
                "c total", t.df_total, t.ss_total
            ));
            match t.r_squared {
                Some(r2) => out.push_str(&format!("R-squared: {r2:.6}\n")),
                None => out.push_str("R-squared: undefined (constant response)\n"),
            }
            if t.degenerate {
                out.push_str("note: total sum of squares is numerically zero\n");
            }
        }
        None => {
            out.push_str(&format!(
                "{:<12} {:>6} {:>14} {:>14} {:>10} {:>12}\n",
                "source", "df", "SS", "MS", "F", "p"
            ));
            out.push_str("insufficient data: ANOVA needs more observations than parameters and an intercept\n");
        }
    }
    out
}

/// A Wald (or, for the linear model, general-linear-hypothesis F) test of
/// `C beta = 0`. The denominator degrees of freedom are present only for the
/// F form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContrastTestReport {
    pub kind: String,
    pub statistic: f64,
    pub df: (f64, Option<f64>),
    pub p_value: f64,
}

pub fn contrast_test(
    snapshot: &StreamSnapshot,
    contrast: Option<&Matrix>,
) -> Result<ContrastTestReport, CliError> {
    let (_, intercept) = column_names(&snapshot.schema_fingerprint);
    match &snapshot.engine {
        EngineSnapshot::Lm { state } => {
            let c = match contrast {
                Some(c) => c.clone(),
                None => default_slope_contrast(state.p(), intercept)
                    .ok_or_else(|| CliError::other("no default contrast without an intercept"))?,
            };
            let t = state.glh_f_test(&c)?;
            Ok(ContrastTestReport {
                kind: "glh_f".into(),
                statistic: t.f,
                df: (t.df1, Some(t.df2)),
                p_value: t.p_value,
            })
        }
        EngineSnapshot::Cee { .. } | EngineSnapshot::Cuee { .. } => {
            let (beta, v, p) = match &snapshot.engine {
                EngineSnapshot::Cee { state } => (
                    state.beta().map(<[f64]>::to_vec),
                    state.v().cloned(),
                    state.p(),
                ),
                EngineSnapshot::Cuee { state } => (
                    state.beta_tilde().map(<[f64]>::to_vec),
                    state.v_tilde().cloned(),
                    state.p(),
                ),
                EngineSnapshot::Lm { .. } => unreachable!(),
            };
            let beta = beta.ok_or_else(|| {
                CliError::other("estimate unavailable: cumulative design is singular")
            })?;
            let v = v.ok_or_else(|| CliError::other("variance unavailable"))?;
            let c = match contrast {
                Some(c) => c.clone(),
                None => default_slope_contrast(p, intercept)
                    .ok_or_else(|| CliError::other("no default contrast without an intercept"))?,
            };
            let w = wald_global(&beta, &v, &c)?;
            Ok(ContrastTestReport {
                kind: "wald".into(),
                statistic: w.w,
                df: (w.df as f64, None),
                p_value: w.p_value,
            })
        }
    }
}

pub fn render_contrast(t: &ContrastTestReport) -> String {
    match t.kind.as_str() {
        "glh_f" => format!(
            "GLH F test: F = {:.6}, df = ({}, {}), p = {:.4e}\n",
            t.statistic,
            t.df.0,
            t.df.1.unwrap_or(f64::NAN),
            t.p_value
        ),
        _ => format!(
            "Wald test: W = {:.6}, df = {}, p = {:.4e}\n",
            t.statistic, t.df.0, t.p_value
        ),
    }
}

/// Parse a contrast matrix from headerless CSV (q rows, p columns).
pub fn parse_contrast(path: &std::path::Path, p: usize) -> Result<Matrix, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::other(format!("cannot open contrast file: {e}")))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::other(format!("contrast file: {e}")))?;
        let row: Result<Vec<f64>, _> = record.iter().map(|c| c.trim().parse::<f64>()).collect();
        let row = row.map_err(|_| CliError::other("contrast file has non-numeric cells"))?;
        if row.len() != p {
            return Err(CliError::other(format!(
                "contrast row has {} entries for p = {p}",
                row.len()
            )));
        }
        rows.push(row);
    }
    Matrix::from_rows(&rows).map_err(|e| CliError::other(e.to_string()))
}

pub fn render_diagnostics(snapshot: &StreamSnapshot) -> String {
    match &snapshot.last_diagnostics {
        None => "no diagnostics recorded (enable them in the model config)\n".to_string(),
        Some(d) => {
            let mut out = format!("diagnostics for accumulation point {}\n", d.chunk_index + 1);
            if let Some(f) = &d.normal_f {
                out.push_str(&format!(
                    "normal F: {:.6} on ({}, {}) df, p = {:.4e}\n",
                    f.statistic, f.df.0, f.df.1, f.p_value
                ));
            }
            if let Some(f) = &d.asymptotic_f {
                out.push_str(&format!(
                    "asymptotic F: {:.6} on ({}, {}) df, p = {:.4e}\n",
                    f.statistic, f.df.0, f.df.1, f.p_value
                ));
            }
            let flagged: Vec<&streamstat_core::diag::ObservationDiagnostic> =
                d.observations.iter().filter(|o| o.flagged).collect();
            if !d.observations.is_empty() {
                out.push_str(&format!(
                    "{} observation(s) tested, {} flagged at the configured FDR level\n",
                    d.observations.len(),
                    flagged.len()
                ));
                for o in flagged.iter().take(50) {
                    out.push_str(&format!(
                        "  #{:<6} e = {:>10.4}  t = {:>8.3}  p_adj = {:.4e}\n",
                        o.index, o.e_check, o.t_check, o.p_adj
                    ));
                }
            }
            out
        }
    }
}

