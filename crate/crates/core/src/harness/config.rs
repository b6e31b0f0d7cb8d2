use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::dynamics::{inertial_params, UpdateRule};
use crate::error::{Error, Result};
use crate::spectral::NS_DEFAULT_ITERS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Exp1,
    Exp2,
    EpsSweep,
    Chaos,
    Custom,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Self::Exp1 => "exp1",
            Self::Exp2 => "exp2",
            Self::EpsSweep => "eps_sweep",
            Self::Chaos => "chaos",
            Self::Custom => "custom",
        }
    }

    /// Default settings; the experiment presets carry two `(M, N)` rows each.
    pub fn default_configs(self) -> Vec<ExperimentConfig> {
        let base = ExperimentConfig { preset: self, ..ExperimentConfig::default() };
        match self {
            Self::Exp1 => vec![
                ExperimentConfig { m: 1, n: 10, eps_list: vec![1.0, 3e-2, 1e-3, 1e-8], ..base.clone() },
                ExperimentConfig { m: 4, n: 32, eps_list: vec![1.0, 1e-1, 1e-2, 1e-4], ..base },
            ],
            Self::Exp2 => vec![
                ExperimentConfig { m: 3, n: 12, iters: 2000, eps_list: vec![1e-1, 1e-3, 1e-4, 1e-5], ..base.clone() },
                ExperimentConfig { m: 10, n: 10, iters: 2000, eps_list: vec![1e-1, 1e-3, 1e-5, 1e-7], ..base },
            ],
            Self::EpsSweep => vec![ExperimentConfig {
                m: 1,
                n: 10,
                iters: 1000,
                eps_list: (1..=8).map(|k| 10f64.powi(-k)).collect(),
                rules: vec![RuleKind::Hard, RuleKind::Regularized],
                ..base
            }],
            Self::Chaos => vec![ExperimentConfig { rows: 8, cols: 4, iters: 200, eps_list: vec![1.0], ..base }],
            Self::Custom => vec![base],
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp1" => Ok(Self::Exp1),
            "exp2" => Ok(Self::Exp2),
            "eps_sweep" => Ok(Self::EpsSweep),
            "chaos" => Ok(Self::Chaos),
            "custom" => Ok(Self::Custom),
            other => Err(Error::InvalidConfig(format!("unknown preset `{other}`"))),
        }
    }
}

/// Rule families selectable in a config; `regularized` expands over `eps_list`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Euclidean,
    Hard,
    NewtonSchulz,
    Regularized,
}

impl RuleKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Euclidean => "euclidean",
            Self::Hard => "hard",
            Self::NewtonSchulz => "newton_schulz",
            Self::Regularized => "regularized",
        }
    }
}

impl FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "hard" => Ok(Self::Hard),
            "newton_schulz" => Ok(Self::NewtonSchulz),
            "regularized" => Ok(Self::Regularized),
            other => Err(Error::InvalidConfig(format!("unknown rule `{other}`"))),
        }
    }
}

/// One experiment setting. Serialized as flat `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    /// Number of targets (Exp1) or teachers (Exp2).
    pub m: usize,
    /// Number of particles.
    pub n: usize,
    pub h: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub iters: usize,
    pub eps_list: Vec<f64>,
    pub rules: Vec<RuleKind>,
    pub seed: u64,
    pub record_stride: usize,
    pub out_dir: PathBuf,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
    pub ns_iters: usize,
    /// Mean-match matrix shape.
    pub rows: usize,
    pub cols: usize,
    /// Teacher-student sizes.
    pub d: usize,
    pub r: usize,
    pub p: usize,
    pub samples: usize,
    /// Chaos study sizes.
    pub n_list: Vec<usize>,
    pub n_ref: usize,
    pub n_seeds: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Custom,
            m: 1,
            n: 10,
            h: 0.01,
            gamma: 1.0,
            alpha: 0.01,
            iters: 10_000,
            eps_list: vec![1.0],
            rules: vec![RuleKind::Euclidean, RuleKind::Hard, RuleKind::NewtonSchulz, RuleKind::Regularized],
            seed: 0,
            record_stride: 10,
            out_dir: PathBuf::from("runs"),
            threads: 0,
            ns_iters: NS_DEFAULT_ITERS,
            rows: 16,
            cols: 8,
            d: 10,
            r: 6,
            p: 4,
            samples: 320,
            n_list: vec![8, 16, 32, 64, 128],
            n_ref: 1024,
            n_seeds: 8,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::InvalidConfig(format!("bad value `{v}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(key, s)).collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "preset" => self.preset = value.trim().parse()?,
            "M" => self.m = parse(key, value)?,
            "N" => self.n = parse(key, value)?,
            "h" => self.h = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "iters" => self.iters = parse(key, value)?,
            "eps_list" => self.eps_list = parse_list(key, value)?,
            "rules" => self.rules = parse_list(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "record_stride" => self.record_stride = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            "threads" => self.threads = parse(key, value)?,
            "ns_iters" => self.ns_iters = parse(key, value)?,
            "rows" => self.rows = parse(key, value)?,
            "cols" => self.cols = parse(key, value)?,
            "d" => self.d = parse(key, value)?,
            "r" => self.r = parse(key, value)?,
            "p" => self.p = parse(key, value)?,
            "samples" => self.samples = parse(key, value)?,
            "n_list" => self.n_list = parse_list(key, value)?,
            "n_ref" => self.n_ref = parse(key, value)?,
            "n_seeds" => self.n_seeds = parse(key, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        inertial_params(self.h, self.gamma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if self.m == 0 || self.n == 0 {
            return bad("M and N must be positive");
        }
        if self.record_stride == 0 {
            return bad("record_stride must be positive");
        }
        if self.rules.is_empty() {
            return bad("at least one rule is required");
        }
        if self.rules.contains(&RuleKind::Regularized) && self.eps_list.is_empty() {
            return bad("regularized rule needs a nonempty eps_list");
        }
        if self.eps_list.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return bad("eps_list entries must be positive");
        }
        if !(self.alpha >= 0.0) {
            return bad("alpha must be nonnegative");
        }
        if self.ns_iters == 0 {
            return bad("ns_iters must be positive");
        }
        if [self.rows, self.cols, self.d, self.r, self.p, self.samples].contains(&0) {
            return bad("problem sizes must be positive");
        }
        Ok(())
    }

    /// Every configured rule, with `regularized` expanded over `eps_list`.
    pub fn update_rules(&self) -> Result<Vec<UpdateRule>> {
        let mut out = Vec::new();
        for kind in &self.rules {
            match kind {
                RuleKind::Euclidean => out.push(UpdateRule::EuclideanMomentum),
                RuleKind::Hard => out.push(UpdateRule::HardMuon),
                RuleKind::NewtonSchulz => out.push(UpdateRule::NewtonSchulzMuon(self.ns_iters)),
                RuleKind::Regularized => {
                    for &e in &self.eps_list {
                        out.push(UpdateRule::regularized(e)?);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Directory-safe label of the `(M, N)` setting.
    pub fn label(&self) -> String {
        format!("m{}_n{}", self.m, self.n)
    }

    /// Machine-readable echo; [`parse_config`] reads it back to an equal config.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let rules: Vec<&str> = self.rules.iter().map(|r| r.name()).collect();
        let lines: [(&str, String); 23] = [
            ("preset", self.preset.name().to_string()),
            ("M", self.m.to_string()),
            ("N", self.n.to_string()),
            ("h", self.h.to_string()),
            ("gamma", self.gamma.to_string()),
            ("alpha", self.alpha.to_string()),
            ("iters", self.iters.to_string()),
            ("eps_list", join(&self.eps_list)),
            ("rules", rules.join(", ")),
            ("seed", self.seed.to_string()),
            ("record_stride", self.record_stride.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("threads", self.threads.to_string()),
            ("ns_iters", self.ns_iters.to_string()),
            ("rows", self.rows.to_string()),
            ("cols", self.cols.to_string()),
            ("d", self.d.to_string()),
            ("r", self.r.to_string()),
            ("p", self.p.to_string()),
            ("samples", self.samples.to_string()),
            ("n_list", join(&self.n_list)),
            ("n_ref", self.n_ref.to_string()),
            ("n_seeds", self.n_seeds.to_string()),
        ];
        for (k, v) in lines {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected `key = value`", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Parses a single config, starting from the preset named in the text
/// (or `custom`) and its first setting.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let pairs = parse_kv(text)?;
    let preset = match pairs.iter().find(|(k, _)| k == "preset") {
        Some((_, v)) => v.parse()?,
        None => Preset::Custom,
    };
    let mut cfg = preset.default_configs().remove(0);
    for (k, v) in &pairs {
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

/// Resolves the settings to run: preset defaults, then `overrides` in order.
///
/// If the overrides pin `M` or `N`, only the matching preset row (or the
/// first one) is kept.
pub fn resolve(preset: Preset, overrides: &[(String, String)]) -> Result<Vec<ExperimentConfig>> {
    let mut configs = preset.default_configs();
    let pins = |key: &str| -> Result<Option<usize>> {
        overrides.iter().rev().find(|(k, _)| k == key).map(|(k, v)| parse(k, v)).transpose()
    };
    let (m, n) = (pins("M")?, pins("N")?);
    if m.is_some() || n.is_some() {
        let pick = configs
            .iter()
            .position(|c| m.is_none_or(|m| m == c.m) && n.is_none_or(|n| n == c.n))
            .unwrap_or(0);
        configs = vec![configs.swap_remove(pick)];
    }
    for cfg in &mut configs {
        for (k, v) in overrides {
            if k == "preset" {
                continue;
            }
            cfg.set(k, v)?;
        }
        cfg.validate()?;
    }
    Ok(configs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp1_defaults() {
        let c = Preset::Exp1.default_configs();
        assert_eq!((c[0].m, c[0].n, c[1].m, c[1].n), (1, 10, 4, 32));
        assert_eq!(c[0].eps_list, vec![1.0, 3e-2, 1e-3, 1e-8]);
        assert_eq!(c[1].eps_list, vec![1.0, 1e-1, 1e-2, 1e-4]);
        assert!(c.iter().all(|x| x.iters == 10_000 && x.h == 0.01 && x.gamma == 1.0 && x.alpha == 0.01));
        let sp = inertial_params(c[0].h, c[0].gamma).unwrap();
        assert_eq!(sp.beta, 0.99);
    }

    #[test]
    fn exp2_defaults() {
        let c = Preset::Exp2.default_configs();
        assert_eq!((c[0].m, c[0].n, c[1].m, c[1].n), (3, 12, 10, 10));
        assert_eq!(c[0].eps_list, vec![1e-1, 1e-3, 1e-4, 1e-5]);
        assert_eq!(c[1].eps_list, vec![1e-1, 1e-3, 1e-5, 1e-7]);
        assert!(c.iter().all(|x| x.iters == 2000 && (x.d, x.r, x.p, x.samples) == (10, 6, 4, 320)));
    }

    #[test]
    fn echo_round_trips() {
        for preset in [Preset::Exp1, Preset::Exp2, Preset::EpsSweep, Preset::Chaos, Preset::Custom] {
            for cfg in preset.default_configs() {
                assert_eq!(parse_config(&cfg.to_kv()).unwrap(), cfg);
            }
        }
    }

    #[test]
    fn overrides_and_pins() {
        let o = vec![("seed".to_string(), "7".to_string()), ("N".to_string(), "32".to_string())];
        let c = resolve(Preset::Exp1, &o).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].m, c[0].n, c[0].seed), (4, 32, 7));
        assert_eq!(c[0].eps_list, vec![1.0, 1e-1, 1e-2, 1e-4]);

        let bad = vec![("h".to_string(), "2".to_string())];
        assert!(matches!(resolve(Preset::Exp1, &bad), Err(Error::InvalidConfig(_))));
        let unknown = vec![("colour".to_string(), "red".to_string())];
        assert!(resolve(Preset::Exp1, &unknown).is_err());
    }

    #[test]
    fn kv_parsing() {
        let pairs = parse_kv("# comment\n\neps_list = 1, 1e-2 # trailing\nrules=hard,regularized\n").unwrap();
        assert_eq!(pairs.len(), 2);
        let mut c = ExperimentConfig::default();
        for (k, v) in &pairs {
            c.set(k, v).unwrap();
        }
        assert_eq!(c.eps_list, vec![1.0, 1e-2]);
        assert_eq!(c.update_rules().unwrap().len(), 3);
        assert!(parse_kv("no equals sign").is_err());
    }
}
