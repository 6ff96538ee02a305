//! Writing a run to disk: the CSV artifacts plus `manifest.toml`.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::run::RunOutput;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "IMPACT_HEDGE_OUT";
pub const DEFAULT_OUT: &str = "impact-hedge-out";
pub const MANIFEST: &str = "manifest.toml";

pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `--out`, then `output.directory`, then the environment, then the default.
pub fn output_dir(flag: Option<&Path>, config: &ScenarioConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(d) = &config.output.directory {
        return PathBuf::from(d);
    }
    match std::env::var_os(OUT_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => PathBuf::from(DEFAULT_OUT),
    }
}

/// Rewrites every scientific-notation field with `digits` significant digits.
pub fn with_precision(csv: &[u8], digits: usize) -> Vec<u8> {
    let text = String::from_utf8_lossy(csv);
    let mut out = String::with_capacity(text.len());
    for (k, line) in text.lines().enumerate() {
        if k == 0 {
            out.push_str(line);
        } else {
            let fields: Vec<String> = line
                .split(',')
                .map(|f| match f.parse::<f64>() {
                    Ok(v) if f.contains('e') && v.is_finite() => format!("{v:.*e}", digits - 1),
                    _ => f.to_string(),
                })
                .collect();
            out.push_str(&fields.join(","));
        }
        out.push('\n');
    }
    out.into_bytes()
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// Writes the artifacts and the manifest; returns the paths written.
pub fn emit_outputs(output: &RunOutput, config: &ScenarioConfig, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let digits = config.output.precision;
    let mut written = Vec::new();
    let mut files = String::new();
    for a in &output.artifacts {
        let bytes = if digits < 17 && a.name.ends_with(".csv") {
            with_precision(&a.bytes, digits)
        } else {
            a.bytes.clone()
        };
        let path = dir.join(&a.name);
        fs::write(&path, &bytes).map_err(|e| CliError::io(&path, e))?;
        files.push_str(&format!(
            "\n[[files]]\nname = {}\nbytes = {}\nsha256 = {}\n",
            quoted(&a.name),
            bytes.len(),
            quoted(&digest_hex(&bytes))
        ));
        written.push(path);
    }
    let report = &output.report;
    let mut manifest = format!(
        "subcommand = {}\nversion = {}\nconfig_digest = {}\nstatus = {}\nprecision = {digits}\n",
        quoted(report.subcommand.name()),
        quoted(env!("CARGO_PKG_VERSION")),
        quoted(&report.input_digest),
        quoted(if report.failures.is_empty() { "ok" } else { "failed" }),
    );
    manifest.push_str("\n[metrics]\n");
    for (name, value) in &report.metrics {
        manifest.push_str(&format!("{} = {}\n", quoted(name), quoted(&value.render())));
    }
    manifest.push_str(&files);
    let path = dir.join(MANIFEST);
    fs::write(&path, manifest).map_err(|e| CliError::io(&path, e))?;
    written.push(path);
    Ok(written)
}
