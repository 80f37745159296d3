//! CSV and JSON emission. Floats are serialized with 17 significant digits,
//! and report assembly is order-stable, so emitted bodies are byte-identical
//! across runs of the same scenario.

use std::fs;
use std::path::{Path, PathBuf};

use zeno_core::error::{Result, ZenoError};
use zeno_core::spectral::Regime;

use crate::runner::{RunReport, VerifyEntry};
use crate::scenario::OutputKind;

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| {
        ZenoError::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn regime_token(regime: Regime, exceeds: bool) -> &'static str {
    match (regime, exceeds) {
        (Regime::Zeno, _) => "zeno",
        (Regime::AntiZeno, true) => "anti_zeno_above_gr",
        (Regime::AntiZeno, false) => "anti_zeno",
        (Regime::Neutral, _) => "neutral",
    }
}

/// CSV body of the rate sweep: `tau,rate,rate_golden_rule,regime`. Each τ
/// row carries the label of the interval starting at it; the last row
/// repeats the final interval's label.
pub fn rates_csv(report: &RunReport) -> Option<String> {
    let curve = report.rates_curve.as_ref()?;
    let mut out = String::from("tau,rate,rate_golden_rule,regime\n");
    for (k, (tau, rate)) in curve.taus.iter().zip(&curve.rates).enumerate() {
        let interval = &curve.intervals[k.min(curve.intervals.len() - 1)];
        out.push_str(&format!(
            "{},{},{},{}\n",
            format_float(*tau),
            format_float(*rate),
            format_float(curve.golden_rule),
            regime_token(interval.regime, interval.exceeds_golden_rule)
        ));
    }
    Some(out)
}

/// CSV body of the broadening profile: `omega,P`.
pub fn profile_csv(report: &RunReport) -> Option<String> {
    let profile = report.profile.as_ref()?;
    let mut out = String::from("omega,P\n");
    for (omega, p) in profile {
        out.push_str(&format!("{},{}\n", format_float(*omega), format_float(*p)));
    }
    Some(out)
}

/// CSV body of per-channel jump components:
/// `channel,w_total,w_m,w_f,w_i`.
pub fn components_csv(report: &RunReport) -> Option<String> {
    if report.components.is_empty() {
        return None;
    }
    let mut out = String::from("channel,w_total,w_m,w_f,w_i\n");
    for row in &report.components {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.channel,
            format_float(row.w_total),
            format_float(row.w_m),
            format_float(row.w_f),
            format_float(row.w_i)
        ));
    }
    Some(out)
}

/// CSV body of survival probabilities: `n,survival_exp,survival_power`.
pub fn survival_csv(report: &RunReport) -> Option<String> {
    if report.survival.is_empty() {
        return None;
    }
    let mut out = String::from("n,survival_exp,survival_power\n");
    for row in &report.survival {
        out.push_str(&format!(
            "{},{},{}\n",
            row.n,
            format_float(row.survival_exp),
            format_float(row.survival_power)
        ));
    }
    Some(out)
}

/// Write the requested artifacts into `out_dir`; returns the files written.
/// Requested sections that are empty are skipped with a log note.
pub fn emit_csv(
    report: &RunReport,
    outputs: &[OutputKind],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for kind in outputs {
        let (name, body) = match kind {
            OutputKind::Rates => ("rates.csv", rates_csv(report)),
            OutputKind::Profile => ("profile.csv", profile_csv(report)),
            OutputKind::Components => ("components.csv", components_csv(report)),
            OutputKind::Survival => ("survival.csv", survival_csv(report)),
        };
        match body {
            Some(body) => {
                let path = out_dir.join(name);
                write_file(&path, &body)?;
                written.push(path);
            }
            None => {
                log::info!("section `{}` is empty; {name} omitted", kind.name());
            }
        }
    }
    Ok(written)
}

/// Verification report JSON.
pub fn verify_json(entries: &[VerifyEntry]) -> String {
    serde_json::to_string_pretty(entries).expect("verify report serialization")
}

pub fn emit_verify(entries: &[VerifyEntry], out_dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("verify.json");
    write_file(&path, &verify_json(entries))?;
    Ok(path)
}
