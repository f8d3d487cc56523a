use serde::{Deserialize, Serialize};

/// Everything needed to replay a reconstruction: the exact command line plus
/// the resolved configuration and run facts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Arguments after the program name.
    pub argv: Vec<String>,
    pub method: String,
    /// Resolved configuration, `null` for zero-fill.
    pub config: serde_json::Value,
    pub seed: u64,
    pub step: Option<f64>,
    pub inputs: Vec<String>,
    pub outputs: String,
    pub acceleration: f64,
    /// Largest measured sample magnitude; the weights are absolute.
    pub data_peak: f64,
    pub final_nrmse: Option<f64>,
    pub wall_clock_s: f64,
}

/// Sets `flag` to `value`, accepting both `--flag v` and `--flag=v`.
pub fn replace_flag(argv: &mut Vec<String>, flag: &str, value: &str) {
    let prefix = format!("{flag}=");
    if let Some(i) = argv.iter().position(|a| a == flag) {
        if i + 1 < argv.len() {
            argv[i + 1] = value.to_string();
            return;
        }
        argv.truncate(i);
    } else if let Some(i) = argv.iter().position(|a| a.starts_with(&prefix)) {
        argv[i] = format!("{prefix}{value}");
        return;
    }
    argv.push(flag.to_string());
    argv.push(value.to_string());
}
