//! Run configuration: `key = value` files, structure addresses and range
//! validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use innervar::gallery;
use innervar::structure::{PhiFn, StructureSpec};
use innervar::{Complex64 as C64, GridSpec, Region};

/// Largest accepted samples per axis.
pub const MAX_N: usize = 8192;
pub const MAX_FAMILY: usize = 4096;
pub const MAX_ITER_LIMIT: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rho {
    /// `rho = lambda_0` for `solve`, `rho = sigma` for `verify`.
    Auto,
    Value(f64),
}

impl fmt::Display for Rho {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rho::Auto => write!(f, "auto"),
            Rho::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Option<String>,
    pub structure: Option<String>,
    pub h: Option<String>,
    pub a: f64,
    pub n: usize,
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub rho: Rho,
    pub m: usize,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            structure: None,
            h: None,
            a: 4.0,
            n: 256,
            tol: None,
            max_iter: innervar::solver::DEFAULT_MAX_ITER,
            rho: Rho::Auto,
            m: 16,
            out: PathBuf::from("innervar-out"),
            seed: 0,
        }
    }
}

pub const KEYS: [&str; 11] = ["command", "structure", "h", "a", "n", "tol", "max_iter", "rho", "m", "out", "seed"];

impl RunConfig {
    /// Parse `key = value` lines on top of the defaults. Blank lines and
    /// text after `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`, got `{line}`", lineno + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(prev) = seen.insert(key.to_string(), lineno + 1) {
                return Err(format!("line {}: `{key}` already set on line {prev}", lineno + 1));
            }
            cfg.set(key, value).map_err(|e| format!("line {}: {e}", lineno + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "command" => self.command = Some(value.to_string()),
            "structure" => self.structure = Some(value.to_string()),
            "h" => self.h = Some(value.to_string()),
            "a" => self.a = parse_num(key, value)?,
            "n" => self.n = parse_num(key, value)?,
            "tol" => self.tol = Some(parse_num(key, value)?),
            "max_iter" => self.max_iter = parse_num(key, value)?,
            "rho" => self.rho = parse_rho(value)?,
            "m" => self.m = parse_num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "seed" => self.seed = parse_num(key, value)?,
            _ => return Err(format!("unknown key `{key}` (known: {})", KEYS.join(", "))),
        }
        Ok(())
    }

    /// Range checks shared by every command.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(format!("a must be positive and finite, got {}", self.a));
        }
        if self.n < GridSpec::MIN_N || self.n > MAX_N || !self.n.is_power_of_two() {
            return Err(format!(
                "n must be a power of two in [{}, {MAX_N}], got {}",
                GridSpec::MIN_N,
                self.n
            ));
        }
        if let Some(t) = self.tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(format!("tol must be positive and finite, got {t}"));
            }
        }
        if self.max_iter == 0 || self.max_iter > MAX_ITER_LIMIT {
            return Err(format!("max_iter must lie in [1, {MAX_ITER_LIMIT}], got {}", self.max_iter));
        }
        if let Rho::Value(r) = self.rho {
            if !(r.is_finite() && r > 0.0) {
                return Err(format!("rho must be positive and finite or `auto`, got {r}"));
            }
        }
        if self.m < 8 || self.m > MAX_FAMILY {
            return Err(format!("m must lie in [8, {MAX_FAMILY}], got {}", self.m));
        }
        if let Some(s) = &self.structure {
            parse_structure(s)?;
        }
        Ok(())
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.a, self.n).expect("validated grid")
    }

    /// The configuration as `key = value` lines, loadable by [`Self::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        if let Some(c) = &self.command {
            line("command", c.clone());
        }
        if let Some(s) = &self.structure {
            line("structure", s.clone());
        }
        if let Some(h) = &self.h {
            line("h", h.clone());
        }
        line("a", format!("{}", self.a));
        line("n", format!("{}", self.n));
        if let Some(t) = self.tol {
            line("tol", format!("{t:e}"));
        }
        line("max_iter", format!("{}", self.max_iter));
        line("rho", self.rho.to_string());
        line("m", format!("{}", self.m));
        line("out", self.out.display().to_string());
        line("seed", format!("{}", self.seed));
        out
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Usage(String),
    Io(String),
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| format!("{key}: cannot parse `{value}`: {e}"))
}

pub fn parse_rho(value: &str) -> Result<Rho, String> {
    if value.eq_ignore_ascii_case("auto") {
        return Ok(Rho::Auto);
    }
    let r: f64 = parse_num("rho", value)?;
    Ok(Rho::Value(r))
}

/// Complex literal such as `6`, `-2`, `1.5-2i`, `i`.
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let t = s.trim();
    t.parse::<C64>()
        .ok()
        .filter(|c| c.re.is_finite() && c.im.is_finite())
        .ok_or_else(|| format!("`{s}` is not a finite complex number"))
}

/// `name:key=value,...` split into the name and a parameter map.
fn split_address(s: &str) -> Result<(&str, BTreeMap<&str, &str>), String> {
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut params = BTreeMap::new();
    for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("structure parameter `{part}` is not `key=value`"))?;
        if params.insert(k.trim(), v.trim()).is_some() {
            return Err(format!("structure parameter `{}` given twice", k.trim()));
        }
    }
    Ok((name.trim(), params))
}

fn take_complex(params: &mut BTreeMap<&str, &str>, key: &str) -> Result<Option<C64>, String> {
    params.remove(key).map(parse_complex).transpose()
}

fn take_f64(params: &mut BTreeMap<&str, &str>, key: &str) -> Result<Option<f64>, String> {
    params.remove(key).map(|v| parse_num::<f64>(key, v)).transpose()
}

/// Structures addressed as
/// `rational:a=<c>,b=<c>[,r=<x>]`, `affine:a=<c>,b=<c>`, `zero`, or
/// `hopf:phi=<phi>[,alpha=<x>,holder=<x>]` with `<phi>` one of `const:<c>`
/// (or a bare `<c>`), `linear:<c>` for `phi(z) = c z`, `gallery:<name>`.
pub fn parse_structure(s: &str) -> Result<StructureSpec, String> {
    let (name, mut params) = split_address(s)?;
    let spec = match name {
        "zero" => Ok(StructureSpec::zero()),
        "rational" => {
            let a = take_complex(&mut params, "a")?.ok_or("rational needs a=<complex>")?;
            let b = take_complex(&mut params, "b")?.unwrap_or_default();
            let r = take_f64(&mut params, "r")?;
            StructureSpec::rational(a, b, r).map_err(|e| e.to_string())
        }
        "affine" => {
            let a = take_complex(&mut params, "a")?.unwrap_or_default();
            let b = take_complex(&mut params, "b")?.unwrap_or_default();
            StructureSpec::affine(a, b).map_err(|e| e.to_string())
        }
        "hopf" => {
            let phi = params.remove("phi").ok_or("hopf needs phi=<const:c | linear:c | gallery:name>")?;
            let alpha = take_f64(&mut params, "alpha")?;
            let holder = take_f64(&mut params, "holder")?;
            parse_hopf(s, phi, alpha, holder)
        }
        "" => Err("empty structure name".to_string()),
        other => Err(format!("unknown structure `{other}` (known: zero, rational, affine, hopf)")),
    }?;
    if let Some(k) = params.keys().next() {
        return Err(format!("unknown parameter `{k}` for structure `{name}`"));
    }
    Ok(spec)
}

fn parse_hopf(address: &str, phi: &str, alpha: Option<f64>, holder: Option<f64>) -> Result<StructureSpec, String> {
    let (kind, value) = phi.split_once(':').unwrap_or(("const", phi));
    let alpha = alpha.unwrap_or(1.0);
    let spec = match kind {
        "const" => {
            let c = parse_complex(value)?;
            let f: PhiFn = Arc::new(move |_| c);
            StructureSpec::hopf(address, f, Region::unit_disk(), alpha, holder.unwrap_or(0.0))
        }
        "linear" => {
            let c = parse_complex(value)?;
            let f: PhiFn = Arc::new(move |z| c * z);
            StructureSpec::hopf(address, f, Region::unit_disk(), alpha, holder.unwrap_or(c.norm()))
        }
        "gallery" => {
            let entry = gallery::by_name(value).ok_or_else(|| format!("unknown gallery entry `{value}`"))?;
            if alpha.ne(&1.0) || holder.is_some() {
                return Err("alpha and holder come from the gallery entry".into());
            }
            match (&entry.phi, entry.structure()) {
                (Some(_), Some(r)) => r,
                _ => return Err(format!("gallery entry `{value}` declares no Hopf structure")),
            }
        }
        other => return Err(format!("unknown phi kind `{other}` (known: const, linear, gallery)")),
    };
    spec.map_err(|e| e.to_string())
}

/// Source of `h` for `verify`.
#[derive(Clone, Debug, PartialEq)]
pub enum HSource {
    Gallery(String),
    File(PathBuf),
}

pub fn parse_h_source(s: &str) -> Result<HSource, String> {
    match s.strip_prefix("gallery:") {
        Some(name) => {
            gallery::by_name(name).ok_or_else(|| format!("unknown gallery entry `{name}` (known: {})", gallery::NAMES.join(", ")))?;
            Ok(HSource::Gallery(name.to_string()))
        }
        None if s.is_empty() => Err("empty --h".into()),
        None => Ok(HSource::File(PathBuf::from(s))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_config_text() {
        let cfg = RunConfig::parse(
            "# solve settings\nstructure = rational:a=6,b=-2\nn = 128   # coarse\nrho = auto\nm = 32\n\nseed = 7\ntol = 1e-9\n",
        )
        .unwrap();
        assert_eq!(cfg.structure.as_deref(), Some("rational:a=6,b=-2"));
        assert_eq!((cfg.n, cfg.m, cfg.seed), (128, 32, 7));
        assert_eq!(cfg.rho, Rho::Auto);
        assert_eq!(cfg.tol, Some(1e-9));
        cfg.validate().unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(RunConfig::parse("n 128").unwrap_err().contains("line 1"));
        assert!(RunConfig::parse("n = 128\nn = 64").unwrap_err().contains("already set"));
        assert!(RunConfig::parse("colour = red").unwrap_err().contains("unknown key"));
        assert!(RunConfig::parse("n = lots").is_err());
        let mut cfg = RunConfig::default();
        cfg.n = 8;
        assert!(cfg.validate().is_err());
        cfg.n = 100;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.rho = Rho::Value(-1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("6").unwrap(), C64::new(6.0, 0.0));
        assert_eq!(parse_complex("-2").unwrap(), C64::new(-2.0, 0.0));
        assert_eq!(parse_complex("1.5-2i").unwrap(), C64::new(1.5, -2.0));
        assert_eq!(parse_complex("i").unwrap(), C64::new(0.0, 1.0));
        assert!(parse_complex("inf").is_err());
        assert!(parse_complex("six").is_err());
    }

    #[test]
    fn structure_addresses() {
        let s = parse_structure("rational:a=6,b=-2").unwrap();
        assert_eq!(s.l(), 6.0);
        assert_eq!(s.eval(C64::new(0.1, 0.0), C64::new(3.0, 0.0)), C64::new(0.0, 0.0));
        let s = parse_structure("hopf:phi=const:-1").unwrap();
        assert_eq!(s.l(), 1.0);
        assert_eq!(s.eval(C64::new(0.0, 0.0), C64::new(0.0, 2.0)), C64::new(0.0, -0.5));
        assert_eq!(parse_structure("hopf:phi=-1").unwrap().l(), 1.0);
        assert!((parse_structure("hopf:phi=linear:2").unwrap().l() - 2.0).abs() < 1e-3);
        assert!(parse_structure("hopf:phi=gallery:cuberoot").is_ok());
        assert!(parse_structure("affine:a=1,b=i").is_ok());
        assert!(parse_structure("zero").is_ok());
        for bad in ["", "rational", "rational:b=1", "rational:a=1,a=2", "rational:a=1,c=2", "hopf", "hopf:phi=gallery:piecewise", "quartic:a=1", "hopf:phi=cubic:1"] {
            assert!(parse_structure(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn h_sources() {
        assert_eq!(parse_h_source("gallery:loglog").unwrap(), HSource::Gallery("loglog".into()));
        assert_eq!(parse_h_source("runs/h.cf64").unwrap(), HSource::File("runs/h.cf64".into()));
        assert!(parse_h_source("gallery:nope").is_err());
    }
}
