//! Experiment configuration: CLI flags override a JSON config file, which
//! overrides per-experiment defaults. The fully resolved configuration is
//! embedded in every output so runs are reproducible from their artifacts.

use residue_core::arith::{self, SquarefreeModulus};
use residue_core::tuples::OffsetSet;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Raw knobs as they arrive from flags or the config file; everything
/// optional so the three layers can merge.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub q: Option<u64>,
    pub q_family: Option<String>,
    pub q_range: Option<String>,
    /// Either a flat array (one set) or an array of arrays.
    pub offsets: Option<serde_json::Value>,
    pub h: Option<u64>,
    pub h_grid: Option<String>,
    pub k: Option<String>,
    pub lambda: Option<String>,
    pub centering: Option<String>,
    pub x: Option<String>,
    pub classes: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub pins: Option<PathBuf>,
    pub mem_budget: Option<u64>,
    pub threads: Option<usize>,
}

impl RawConfig {
    /// Field-wise precedence: `self` wins over `lower`.
    pub fn or(self, lower: RawConfig) -> RawConfig {
        RawConfig {
            q: self.q.or(lower.q),
            q_family: self.q_family.or(lower.q_family),
            q_range: self.q_range.or(lower.q_range),
            offsets: self.offsets.or(lower.offsets),
            h: self.h.or(lower.h),
            h_grid: self.h_grid.or(lower.h_grid),
            k: self.k.or(lower.k),
            lambda: self.lambda.or(lower.lambda),
            centering: self.centering.or(lower.centering),
            x: self.x.or(lower.x),
            classes: self.classes.or(lower.classes),
            out: self.out.or(lower.out),
            format: self.format.or(lower.format),
            pins: self.pins.or(lower.pins),
            mem_budget: self.mem_budget.or(lower.mem_budget),
            threads: self.threads.or(lower.threads),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CenteringChoice {
    Exact,
    Paper,
}

/// The h grid either adapts to each modulus (powers of two up to q) or is a
/// fixed list.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HGrid {
    /// The experiment picks its own grid (corollary1: the halving grid from
    /// ⌊X²/ln X⌋ down to the last h with expected count ≥ 1).
    Auto,
    PerModulusPow2,
    Fixed(Vec<u64>),
}

impl HGrid {
    pub fn for_q(&self, q: u64) -> Vec<u64> {
        match self {
            HGrid::Auto | HGrid::PerModulusPow2 => residue_core::sweeps::pow2_grid(q),
            HGrid::Fixed(v) => v.clone(),
        }
    }
}

/// Everything an experiment needs, fully resolved and serializable.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub experiment: String,
    pub q_list: Vec<u64>,
    pub offset_sets: Vec<String>,
    pub h_grid: HGrid,
    pub k_list: Vec<u32>,
    pub lambda_list: Vec<f64>,
    pub centering: CenteringChoice,
    pub x_list: Vec<u64>,
    pub classes: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub pins: Option<PathBuf>,
    pub mem_budget_bits: u64,
    pub threads: usize,
    #[serde(skip)]
    pub offsets_parsed: Vec<OffsetSet>,
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|e| ConfigError(format!("{what} {t:?}: {e}")))
        })
        .collect()
}

fn resolve_moduli(raw: &RawConfig, default: &str) -> Result<Vec<u64>, ConfigError> {
    let mut sources = 0;
    sources += raw.q.is_some() as u32;
    sources += raw.q_family.is_some() as u32;
    sources += raw.q_range.is_some() as u32;
    if sources > 1 {
        return err("give at most one of --q, --q-family, --q-range");
    }
    let spec: String = if let Some(q) = raw.q {
        q.to_string()
    } else if let Some(f) = &raw.q_family {
        f.clone()
    } else if let Some(r) = &raw.q_range {
        format!("range:{r}")
    } else {
        default.to_string()
    };
    expand_q_spec(&spec)
}

/// Deterministic q-family expansion: a bare integer, `primorial:N`,
/// `list:a,b,c`, or `range:a..b` (all squarefree q in [a, b]).
pub fn expand_q_spec(spec: &str) -> Result<Vec<u64>, ConfigError> {
    if let Some(rest) = spec.strip_prefix("primorial:") {
        let n: u32 = rest
            .parse()
            .map_err(|e| ConfigError(format!("primorial count {rest:?}: {e}")))?;
        return Ok(arith::primorials(n).iter().map(|m| m.q()).collect());
    }
    if let Some(rest) = spec.strip_prefix("list:") {
        let qs: Vec<u64> = parse_list(rest, "modulus")?;
        for &q in &qs {
            validate_squarefree(q)?;
        }
        return Ok(qs);
    }
    if let Some(rest) = spec.strip_prefix("range:") {
        let parts: Vec<&str> = rest.split("..").collect();
        if parts.len() != 2 {
            return err(format!("range {rest:?} must look like a..b"));
        }
        let a: u64 = parts[0]
            .trim()
            .parse()
            .map_err(|e| ConfigError(format!("range start: {e}")))?;
        let b: u64 = parts[1]
            .trim()
            .parse()
            .map_err(|e| ConfigError(format!("range end: {e}")))?;
        if a > b {
            return err(format!("empty range {a}..{b}"));
        }
        return Ok((a.max(1)..=b)
            .filter(|&n| arith::factor_squarefree(n).is_ok())
            .collect());
    }
    let q: u64 = spec
        .parse()
        .map_err(|e| ConfigError(format!("modulus {spec:?}: {e}")))?;
    validate_squarefree(q)?;
    Ok(vec![q])
}

fn validate_squarefree(q: u64) -> Result<SquarefreeModulus, ConfigError> {
    if q == 0 {
        return err("modulus must be positive");
    }
    arith::factor_squarefree(q).map_err(|e| ConfigError(e.to_string()))
}

fn resolve_offsets(raw: &RawConfig, default: &[&str]) -> Result<Vec<OffsetSet>, ConfigError> {
    let Some(value) = &raw.offsets else {
        return default
            .iter()
            .map(|s| {
                s.parse::<OffsetSet>()
                    .map_err(|e| ConfigError(e.to_string()))
            })
            .collect();
    };
    // Accepted shapes: "0,2" (string), [0,2], [[0],[0,2]].
    let from_json = |v: &serde_json::Value| -> Result<OffsetSet, ConfigError> {
        serde_json::from_value::<OffsetSet>(v.clone()).map_err(|e| ConfigError(e.to_string()))
    };
    match value {
        serde_json::Value::String(s) => Ok(vec![s
            .parse::<OffsetSet>()
            .map_err(|e| ConfigError(e.to_string()))?]),
        serde_json::Value::Array(items) if items.iter().all(|i| i.is_array()) => {
            items.iter().map(from_json).collect()
        }
        v @ serde_json::Value::Array(_) => Ok(vec![from_json(v)?]),
        other => err(format!("offsets must be a string or array, got {other}")),
    }
}

fn resolve_h(raw: &RawConfig, default: &str) -> Result<HGrid, ConfigError> {
    if raw.h.is_some() && raw.h_grid.is_some() {
        return err("give at most one of --h and --h-grid");
    }
    if let Some(h) = raw.h {
        if h == 0 {
            return err("h must be positive");
        }
        return Ok(HGrid::Fixed(vec![h]));
    }
    let spec = raw.h_grid.clone().unwrap_or_else(|| default.to_string());
    if spec == "auto" {
        return Ok(HGrid::Auto);
    }
    if spec == "pow2" {
        return Ok(HGrid::PerModulusPow2);
    }
    if let Some(rest) = spec.strip_prefix("pow2:") {
        let max: u64 = rest
            .parse()
            .map_err(|e| ConfigError(format!("pow2 cap {rest:?}: {e}")))?;
        return Ok(HGrid::Fixed(residue_core::sweeps::pow2_grid(max)));
    }
    let hs: Vec<u64> = parse_list(&spec, "h")?;
    if hs.is_empty() || hs.contains(&0) {
        return err("h grid must be nonempty positive integers");
    }
    Ok(HGrid::Fixed(hs))
}

/// Merges flags > file > defaults and resolves every knob for `experiment`.
pub fn resolve(
    experiment: &str,
    flags: RawConfig,
    file: Option<RawConfig>,
) -> Result<ResolvedConfig, ConfigError> {
    let raw = match file {
        Some(f) => flags.or(f),
        None => flags,
    };
    let (q_default, offsets_default, h_default, k_default, lambda_default): (
        &str,
        &[&str],
        &str,
        &str,
        &str,
    ) = match experiment {
        "verify-identities" => ("range:2..210", &["0", "0,2", "0,2,6"], "1", "2", "2"),
        "moments" => ("list:15,30,105,210", &["0,2"], "1,2,4,8,16,32", "2", "2"),
        "gaps" => ("primorial:6", &["0"], "1", "2", "2,3"),
        "squares" => ("list:15,105,1155", &["0"], "pow2", "2", "2"),
        "omega-sets" => ("list:15,105,1155", &["0"], "pow2:64", "2", "2"),
        "corollary1" => ("list:1", &["0"], "auto", "2", "2"),
        "bounds-sweep" => ("primorial:6", &["0,2"], "1", "2,4", "2"),
        "pin-oracle" => ("range:2..2000", &["0", "0,2"], "pow2", "2", "2,3"),
        other => return err(format!("unknown experiment {other:?}")),
    };
    let q_list = resolve_moduli(&raw, q_default)?;
    if q_list.is_empty() {
        return err("no squarefree moduli in the requested range");
    }
    let offsets_parsed = resolve_offsets(&raw, offsets_default)?;
    let h_grid = resolve_h(&raw, h_default)?;
    let k_list: Vec<u32> = parse_list(raw.k.as_deref().unwrap_or(k_default), "k")?;
    if k_list.iter().any(|&k| k == 0 || k > 8) {
        return err("k must lie in 1..=8");
    }
    let lambda_list: Vec<f64> =
        parse_list(raw.lambda.as_deref().unwrap_or(lambda_default), "lambda")?;
    if lambda_list.iter().any(|&l| l.is_nan() || l < 1.0) {
        return err("lambda must be at least 1");
    }
    let centering = match raw.centering.as_deref().unwrap_or("exact") {
        "exact" => CenteringChoice::Exact,
        "paper" => CenteringChoice::Paper,
        other => return err(format!("centering must be exact or paper, got {other:?}")),
    };
    let x_list: Vec<u64> = parse_list(raw.x.as_deref().unwrap_or("20,50"), "x")?;
    if experiment == "corollary1" && x_list.iter().any(|&x| x < 10) {
        return err("x must be at least 10");
    }
    let format = match raw.format.as_deref().unwrap_or("json") {
        "csv" => Format::Csv,
        "json" => Format::Json,
        other => return err(format!("format must be csv or json, got {other:?}")),
    };
    let threads = raw
        .threads
        .or_else(|| {
            std::env::var("RESIDUE_LAB_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    Ok(ResolvedConfig {
        experiment: experiment.to_string(),
        q_list,
        offset_sets: offsets_parsed.iter().map(|d| d.to_string()).collect(),
        h_grid,
        k_list,
        lambda_list,
        centering,
        x_list,
        classes: raw.classes,
        out: raw.out,
        format,
        pins: raw.pins,
        mem_budget_bits: raw.mem_budget.unwrap_or(1 << 31),
        threads,
        offsets_parsed,
    })
}

pub fn load_config_file(path: &std::path::Path) -> Result<RawConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}
