//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! All problems found in a file are collected and reported together, each
//! with its line number. Exactly one of `lambda_bar_sq_scalar`
//! (`2Cλ²/L`) and `lambda_bar_sq_full` (`λ²/L`) must be given; either may
//! hold a comma-separated list, which the sweep commands use as their ladder.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::grid::DEFAULT_THETA_MIN;
use crate::sweep::DEFAULT_PERTURBATION;
use crate::tensor::{MaterialParams, SizeParam, DEFAULT_B, DEFAULT_C, DEFAULT_L};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainChoice {
    Square,
    TruncatedSquare,
    Hexagon,
}

impl DomainChoice {
    pub fn name(&self) -> &'static str {
        match self {
            DomainChoice::Square => "square",
            DomainChoice::TruncatedSquare => "truncated-square",
            DomainChoice::Hexagon => "hexagon",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizeKey {
    Scalar,
    Full,
}

impl SizeKey {
    pub fn name(&self) -> &'static str {
        match self {
            SizeKey::Scalar => "lambda_bar_sq_scalar",
            SizeKey::Full => "lambda_bar_sq_full",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub domain: DomainChoice,
    pub n: usize,
    pub eps: f64,
    pub b: f64,
    pub c: f64,
    pub l: f64,
    pub size_key: SizeKey,
    /// Values as written, in the convention of `size_key`.
    pub sizes: Vec<f64>,
    pub flow: FlowConfig,
    pub theta_min: f64,
    pub perturbation: f64,
    /// Probe threshold for critical detection; `None` means `0.05 B/2C`.
    pub threshold: Option<f64>,
    /// Whether `sweep-square` also computes the stability eigenvalue ladder.
    pub mu_check: bool,
    pub seed: u64,
    /// Resolved settings, for the manifest.
    pub echo: BTreeMap<String, String>,
}

const KEYS: &[&str] = &[
    "domain",
    "n",
    "eps",
    "B",
    "C",
    "L",
    "lambda_bar_sq_scalar",
    "lambda_bar_sq_full",
    "dt",
    "t_max",
    "steady_tol",
    "record_every",
    "safety",
    "theta_min",
    "perturbation",
    "threshold",
    "mu_check",
    "seed",
];

struct Entry {
    value: String,
    origin: String,
}

impl RunConfig {
    /// Material constants at `A = −B²/3C` with `λ` set from the first size
    /// value.
    pub fn params(&self) -> Result<MaterialParams> {
        let base = MaterialParams::at_reference_temperature(self.b, self.c, self.l, 1.0)?;
        base.with_size(self.size_param(self.sizes[0]))
    }

    fn size_param(&self, v: f64) -> SizeParam {
        match self.size_key {
            SizeKey::Scalar => SizeParam::Scalar(v),
            SizeKey::Full => SizeParam::Full(v),
        }
    }

    /// All size values in the scalar convention `2Cλ²/L`.
    pub fn sizes_scalar(&self) -> Vec<f64> {
        self.sizes.iter().map(|&v| self.size_param(v).scalar(self.c)).collect()
    }

    /// All size values in the full convention `λ²/L`.
    pub fn sizes_full(&self) -> Vec<f64> {
        self.sizes.iter().map(|&v| self.size_param(v).full(self.c)).collect()
    }

    /// The single size value required by the non-sweep commands.
    pub fn single_size(&self) -> Result<f64> {
        if self.sizes.len() != 1 {
            return Err(Error::Config(vec![format!(
                "{} holds {} values; this command needs exactly one",
                self.size_key.name(),
                self.sizes.len()
            )]));
        }
        Ok(self.sizes[0])
    }
}

/// Parses configuration text with no overrides.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &[])
}

/// Parses configuration text, then applies `key=value` overrides in order.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut errors = Vec::new();
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();

    let mut put = |key: &str, value: &str, origin: String, from_file: bool, errors: &mut Vec<String>| {
        if !KEYS.contains(&key) {
            errors.push(format!("{origin}: unknown key '{key}'"));
            return;
        }
        if from_file {
            if let Some(prev) = entries.get(key) {
                errors.push(format!("{origin}: duplicate key '{key}' (first set at {})", prev.origin));
                return;
            }
        }
        entries.insert(key.to_string(), Entry { value: value.to_string(), origin });
    };

    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let origin = format!("line {}", i + 1);
        match line.split_once('=') {
            Some((k, v)) => put(k.trim(), v.trim(), origin, true, &mut errors),
            None => errors.push(format!("{origin}: expected key = value, got '{line}'")),
        }
    }
    for (i, o) in overrides.iter().enumerate() {
        let origin = format!("--set #{}", i + 1);
        match o.split_once('=') {
            Some((k, v)) => put(k.trim(), v.trim(), origin, false, &mut errors),
            None => errors.push(format!("{origin}: expected key=value, got '{o}'")),
        }
    }

    let mut echo = BTreeMap::new();
    let mut get = |key: &str| -> Option<(String, String)> {
        entries.get(key).map(|e| {
            echo.insert(key.to_string(), e.value.clone());
            (e.value.clone(), e.origin.clone())
        })
    };

    fn num<T: std::str::FromStr>(key: &str, v: &str, origin: &str, errors: &mut Vec<String>) -> Option<T> {
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(_) => {
                errors.push(format!("{origin}: {key} = '{v}' is not a valid number"));
                None
            }
        }
    }
    fn real(key: &str, v: &str, origin: &str, errors: &mut Vec<String>, ok: impl Fn(f64) -> bool, range: &str) -> Option<f64> {
        let x: f64 = num(key, v, origin, errors)?;
        if !x.is_finite() || !ok(x) {
            errors.push(format!("{origin}: {key} = {v} out of range ({range})"));
            return None;
        }
        Some(x)
    }

    let domain = match get("domain") {
        Some((v, o)) => match v.as_str() {
            "square" => Some(DomainChoice::Square),
            "truncated-square" => Some(DomainChoice::TruncatedSquare),
            "hexagon" => Some(DomainChoice::Hexagon),
            _ => {
                errors.push(format!("{o}: domain = '{v}' must be square, truncated-square or hexagon"));
                None
            }
        },
        None => {
            errors.push("missing required key 'domain'".to_string());
            None
        }
    };

    let n = match get("n") {
        Some((v, o)) => num::<usize>("n", &v, &o, &mut errors).and_then(|n| {
            if n % 2 == 0 {
                errors.push(format!("{o}: n = {n} is even; the origin must be a grid node, so n has to be odd"));
                None
            } else if n < 17 {
                errors.push(format!("{o}: n = {n} out of range (n >= 17)"));
                None
            } else {
                Some(n)
            }
        }),
        None => Some(65),
    };

    let eps = match get("eps") {
        Some((v, o)) => real("eps", &v, &o, &mut errors, |x| (0.0..0.5).contains(&x), "0 <= eps < 1/2"),
        None => Some(match domain {
            Some(DomainChoice::Hexagon) => 0.0,
            _ => 0.0625,
        }),
    };
    if let (Some(DomainChoice::Square), Some(e)) = (domain, eps) {
        if e <= 0.0 {
            errors.push("eps must be positive on the square (it is the width of the corner ramp)".to_string());
        }
    }

    let mut positive = |key: &str, default: f64, errors: &mut Vec<String>| match get(key) {
        Some((v, o)) => real(key, &v, &o, errors, |x| x > 0.0, "> 0"),
        None => Some(default),
    };
    let b = positive("B", DEFAULT_B, &mut errors);
    let c = positive("C", DEFAULT_C, &mut errors);
    let l = positive("L", DEFAULT_L, &mut errors);
    let defaults = FlowConfig::default();
    let t_max = positive("t_max", defaults.t_max, &mut errors);
    let steady_tol = positive("steady_tol", defaults.steady_tol, &mut errors);
    let theta_min = match get("theta_min") {
        Some((v, o)) => real("theta_min", &v, &o, &mut errors, |x| x > 0.0 && x <= 1.0, "0 < theta_min <= 1"),
        None => Some(DEFAULT_THETA_MIN),
    };
    let safety = match get("safety") {
        Some((v, o)) => real("safety", &v, &o, &mut errors, |x| x > 0.0 && x <= 1.0, "0 < safety <= 1"),
        None => Some(defaults.safety),
    };
    let dt = match get("dt") {
        Some((v, o)) => real("dt", &v, &o, &mut errors, |x| x > 0.0, "> 0").map(Some),
        None => Some(None),
    };
    let record_every = match get("record_every") {
        Some((v, o)) => num::<usize>("record_every", &v, &o, &mut errors).and_then(|r| {
            if r == 0 {
                errors.push(format!("{o}: record_every must be at least 1"));
                None
            } else {
                Some(r)
            }
        }),
        None => Some(defaults.record_every),
    };
    let perturbation = match get("perturbation") {
        Some((v, o)) => real("perturbation", &v, &o, &mut errors, |x| x >= 0.0 && x < 1.0, "0 <= perturbation < 1"),
        None => Some(DEFAULT_PERTURBATION),
    };
    let threshold = match get("threshold") {
        Some((v, o)) => real("threshold", &v, &o, &mut errors, |x| x > 0.0, "> 0").map(Some),
        None => Some(None),
    };
    let mu_check = match get("mu_check") {
        Some((v, o)) => match v.as_str() {
            "true" => Some(true),
            "false" => Some(false),
            _ => {
                errors.push(format!("{o}: mu_check = '{v}' must be true or false"));
                None
            }
        },
        None => Some(true),
    };
    let seed = match get("seed") {
        Some((v, o)) => num::<u64>("seed", &v, &o, &mut errors),
        None => Some(0),
    };

    let scalar = get("lambda_bar_sq_scalar");
    let full = get("lambda_bar_sq_full");
    let size = match (scalar, full) {
        (Some((_, o1)), Some((_, o2))) => {
            errors.push(format!(
                "conflicting size keys: lambda_bar_sq_scalar ({o1}) and lambda_bar_sq_full ({o2}); give exactly one"
            ));
            None
        }
        (None, None) => {
            errors.push("missing required key: one of lambda_bar_sq_scalar or lambda_bar_sq_full".to_string());
            None
        }
        (Some((v, o)), None) => parse_list("lambda_bar_sq_scalar", &v, &o, &mut errors).map(|s| (SizeKey::Scalar, s)),
        (None, Some((v, o))) => parse_list("lambda_bar_sq_full", &v, &o, &mut errors).map(|s| (SizeKey::Full, s)),
    };

    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    let (size_key, sizes) = size.expect("checked");
    let flow = FlowConfig {
        dt: dt.expect("checked"),
        t_max: t_max.expect("checked"),
        steady_tol: steady_tol.expect("checked"),
        record_every: record_every.expect("checked"),
        safety: safety.expect("checked"),
    };
    let domain = domain.expect("checked");
    let n = n.expect("checked");
    let eps = eps.expect("checked");
    echo.insert("domain".into(), domain.name().into());
    echo.insert("n".into(), n.to_string());
    echo.insert("eps".into(), eps.to_string());
    Ok(RunConfig {
        domain,
        n,
        eps,
        b: b.expect("checked"),
        c: c.expect("checked"),
        l: l.expect("checked"),
        size_key,
        sizes,
        flow,
        theta_min: theta_min.expect("checked"),
        perturbation: perturbation.expect("checked"),
        threshold: threshold.expect("checked"),
        mu_check: mu_check.expect("checked"),
        seed: seed.expect("checked"),
        echo,
    })
}

fn parse_list(key: &str, v: &str, origin: &str, errors: &mut Vec<String>) -> Option<Vec<f64>> {
    let mut out = Vec::new();
    for part in v.split(',') {
        let part = part.trim();
        match part.parse::<f64>() {
            Ok(x) if x.is_finite() && x >= 0.0 => out.push(x),
            Ok(_) => {
                errors.push(format!("{origin}: {key} value {part} out of range (finite, >= 0)"));
                return None;
            }
            Err(_) => {
                errors.push(format!("{origin}: {key} value '{part}' is not a valid number"));
                return None;
            }
        }
    }
    if out.windows(2).any(|w| w[0] >= w[1]) {
        errors.push(format!("{origin}: {key} list must be strictly increasing"));
        return None;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(Error::Config(e)) => e,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_square() {
        let c = parse_config("domain=square\nn=65\nlambda_bar_sq_scalar=0.05").unwrap();
        assert_eq!(c.domain, DomainChoice::Square);
        assert_eq!(c.n, 65);
        assert_eq!(c.sizes, vec![0.05]);
        assert_eq!(c.eps, 0.0625);
        let p = c.params().unwrap();
        assert!((p.lambda_bar_sq_scalar() - 0.05).abs() < 1e-14);
    }

    #[test]
    fn both_size_keys_conflict() {
        let e = errors("domain=square\nlambda_bar_sq_scalar=1\nlambda_bar_sq_full=1");
        assert!(e.iter().any(|m| m.contains("conflicting size keys")), "{e:?}");
    }

    #[test]
    fn even_n_parity() {
        let e = errors("domain=square\nn=64\nlambda_bar_sq_scalar=1");
        assert!(e.iter().any(|m| m.contains("line 2") && m.contains("origin")), "{e:?}");
    }

    #[test]
    fn errors_are_aggregated() {
        let e = errors("# header\ndomain=disk\nbogus=1\nn=abc\nt_max=-1\n");
        assert!(e.len() >= 5, "{e:?}");
        assert!(e.iter().any(|m| m.starts_with("line 2") && m.contains("domain")));
        assert!(e.iter().any(|m| m.starts_with("line 3") && m.contains("unknown key 'bogus'")));
        assert!(e.iter().any(|m| m.starts_with("line 4")));
        assert!(e.iter().any(|m| m.starts_with("line 5") && m.contains("t_max")));
        assert!(e.iter().any(|m| m.contains("missing required key")));
    }

    #[test]
    fn overrides_and_lists() {
        let c = parse_config_with(
            "domain=hexagon\nlambda_bar_sq_full=0.001\n",
            &["n=33".into(), "lambda_bar_sq_full=0.001, 0.002,0.004".into()],
        )
        .unwrap();
        assert_eq!(c.n, 33);
        assert_eq!(c.sizes_full(), vec![0.001, 0.002, 0.004]);
        let s = c.sizes_scalar();
        assert!((s[1] - 0.002 * 2.0 * c.c).abs() < 1e-12);
        assert!(c.single_size().is_err());
        assert_eq!(c.eps, 0.0);
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = parse_config("\n  # comment\ndomain = truncated-square  # trailing\n\nlambda_bar_sq_scalar = 200\n").unwrap();
        assert_eq!(c.domain, DomainChoice::TruncatedSquare);
        assert_eq!(c.single_size().unwrap(), 200.0);
    }
}
