//! Flat `key = value` run configuration.

use std::fmt::Display;
use std::path::Path;

use crate::error::{Error, Result};
use crate::finitekey::FiniteKeyConfig;
use crate::model::{ChannelParams, MisalignmentAngle};
use crate::optimizer::{Objective, OptimizerSettings};
use crate::pipeline::Mode;
use crate::protocol::{IntensitySettings, Prefactors, ProtocolConfig, Sampling, Variant};
use crate::security::RfiBound;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Symmetric,
    Biased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Asymptotic,
    Finite,
}

/// Everything a CLI run needs. Unset values take the reference defaults.
///
/// `prefactors = auto` resolves to `unit` in asymptotic mode and to
/// `sampling` in finite mode.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub channel: ChannelParams,
    pub variant: Variant,
    pub scheme: Scheme,
    pub mu: f64,
    pub nu: f64,
    pub mu_z: f64,
    pub mu_x: f64,
    pub nu_x: f64,
    pub beta_deg: f64,
    pub sampling: Sampling,
    pub prefactors: Option<Prefactors>,
    pub ie_bound: RfiBound,
    pub mode: ModeKind,
    pub finite: FiniteKeyConfig,
    pub seed: u64,
    pub opt_starts: usize,
    pub output: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            channel: ChannelParams::reference(80.0),
            variant: Variant::Rfi,
            scheme: Scheme::Symmetric,
            mu: 0.67,
            nu: 0.01,
            mu_z: 0.324,
            mu_x: 0.33,
            nu_x: 0.074,
            beta_deg: 0.0,
            sampling: Sampling::default(),
            prefactors: None,
            ie_bound: RfiBound::SquareRoot,
            mode: ModeKind::Asymptotic,
            finite: FiniteKeyConfig::default(),
            seed: 1,
            opt_starts: 8,
            output: None,
        }
    }
}

fn number(key: &str, value: &str) -> std::result::Result<f64, String> {
    let v: f64 = value.parse().map_err(|_| format!("`{key}` expects a number, got `{value}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{key}` must be finite"))
    }
}

fn count(key: &str, value: &str) -> std::result::Result<u64, String> {
    if let Ok(n) = value.parse::<u64>() {
        return Ok(n);
    }
    // Scientific notation such as 3e12.
    let v = number(key, value)?;
    if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(format!("`{key}` expects a non-negative integer, got `{value}`"))
    }
}

impl RunConfig {
    /// Parses a configuration file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: idx + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|reason| Error::Config { line: idx + 1, reason })?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let ch = &mut self.channel;
        match key {
            "eta_d" => ch.eta_d = number(key, value)?,
            "p_d" => ch.p_d = number(key, value)?,
            "e_d" => ch.e_d = number(key, value)?,
            "alpha" => ch.alpha = number(key, value)?,
            "f_ec" => ch.f_ec = number(key, value)?,
            "dist_a" => ch.dist_a = number(key, value)?,
            "dist_b" => ch.dist_b = number(key, value)?,
            "distance_per_arm" => {
                let d = number(key, value)?;
                (ch.dist_a, ch.dist_b) = (d, d);
            }
            "total_distance" => {
                let d = number(key, value)? / 2.0;
                (ch.dist_a, ch.dist_b) = (d, d);
            }
            "variant" => {
                self.variant =
                    Variant::parse(value).ok_or_else(|| format!("unknown variant `{value}` (rfi, original)"))?
            }
            "scheme" => {
                self.scheme = match value {
                    "symmetric" => Scheme::Symmetric,
                    "biased" => Scheme::Biased,
                    _ => return Err(format!("unknown scheme `{value}` (symmetric, biased)")),
                }
            }
            "mu" => self.mu = number(key, value)?,
            "nu" => self.nu = number(key, value)?,
            "mu_z" => self.mu_z = number(key, value)?,
            "mu_x" => self.mu_x = number(key, value)?,
            "nu_x" => self.nu_x = number(key, value)?,
            "beta_deg" => self.beta_deg = number(key, value)?,
            "p_z" => self.sampling.p_z = number(key, value)?,
            "p_x" => self.sampling.p_x = number(key, value)?,
            "p_x_signal" => self.sampling.p_x_signal = number(key, value)?,
            "prefactors" => {
                self.prefactors = match value {
                    "auto" => None,
                    _ => Some(
                        Prefactors::parse(value)
                            .ok_or_else(|| format!("unknown prefactors `{value}` (auto, unit, sampling)"))?,
                    ),
                }
            }
            "ie_bound" => {
                self.ie_bound =
                    RfiBound::parse(value).ok_or_else(|| format!("unknown ie_bound `{value}` (sqrt, printed)"))?
            }
            "mode" => {
                self.mode = match value {
                    "asymptotic" => ModeKind::Asymptotic,
                    "finite" => ModeKind::Finite,
                    _ => return Err(format!("unknown mode `{value}` (asymptotic, finite)")),
                }
            }
            "n_pairs" => self.finite.n_pairs = count(key, value)?,
            "epsilon" => self.finite.epsilon = number(key, value)?,
            "seed" => self.seed = count(key, value)?,
            "opt_starts" => self.opt_starts = count(key, value)? as usize,
            "output" => self.output = (!value.is_empty()).then(|| value.to_string()),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Applies `key=value` overrides, as given on the command line.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for (i, o) in overrides.iter().enumerate() {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config { line: i + 1, reason: format!("override `{o}` is not `key=value`") })?;
            self.set(k.trim(), v.trim()).map_err(|reason| Error::Config { line: i + 1, reason })?;
        }
        Ok(())
    }

    pub fn resolved_prefactors(&self) -> Prefactors {
        self.prefactors.unwrap_or(match self.mode {
            ModeKind::Asymptotic => Prefactors::Unit,
            ModeKind::Finite => Prefactors::Sampling,
        })
    }

    pub fn protocol(&self) -> Result<ProtocolConfig> {
        let intensities = match self.scheme {
            Scheme::Symmetric => IntensitySettings::Symmetric { mu: self.mu, nu: self.nu },
            Scheme::Biased => IntensitySettings::Biased { mu_z: self.mu_z, mu_x: self.mu_x, nu_x: self.nu_x },
        };
        let p = ProtocolConfig {
            variant: self.variant,
            intensities,
            sampling: self.sampling,
            prefactors: self.resolved_prefactors(),
            beta: MisalignmentAngle::from_degrees(self.beta_deg),
            rfi_bound: self.ie_bound,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn mode(&self) -> Mode {
        match self.mode {
            ModeKind::Asymptotic => Mode::Asymptotic,
            ModeKind::Finite => Mode::Finite(self.finite),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.protocol()?;
        if self.mode == ModeKind::Finite {
            self.finite.validate()?;
        }
        Ok(())
    }

    pub fn objective(&self) -> Result<Objective> {
        Ok(Objective { protocol: self.protocol()?, params: self.channel, mode: self.mode() })
    }

    pub fn optimizer_settings(&self) -> OptimizerSettings {
        OptimizerSettings { starts: self.opt_starts.max(1), seed: self.seed, ..OptimizerSettings::default() }
    }

    /// Every key with its resolved value, in a fixed order. Feeding the
    /// lines back through [`RunConfig::parse`] reproduces the configuration.
    pub fn echo(&self) -> Vec<String> {
        fn kv(k: &str, v: impl Display) -> String {
            format!("{k} = {v}")
        }
        let c = &self.channel;
        vec![
            kv("eta_d", c.eta_d),
            kv("p_d", c.p_d),
            kv("e_d", c.e_d),
            kv("alpha", c.alpha),
            kv("f_ec", c.f_ec),
            kv("dist_a", c.dist_a),
            kv("dist_b", c.dist_b),
            kv("variant", self.variant),
            kv(
                "scheme",
                match self.scheme {
                    Scheme::Symmetric => "symmetric",
                    Scheme::Biased => "biased",
                },
            ),
            kv("mu", self.mu),
            kv("nu", self.nu),
            kv("mu_z", self.mu_z),
            kv("mu_x", self.mu_x),
            kv("nu_x", self.nu_x),
            kv("beta_deg", self.beta_deg),
            kv("p_z", self.sampling.p_z),
            kv("p_x", self.sampling.p_x),
            kv("p_x_signal", self.sampling.p_x_signal),
            kv("prefactors", self.resolved_prefactors().as_str()),
            kv("ie_bound", self.ie_bound.as_str()),
            kv(
                "mode",
                match self.mode {
                    ModeKind::Asymptotic => "asymptotic",
                    ModeKind::Finite => "finite",
                },
            ),
            kv("n_pairs", self.finite.n_pairs),
            kv("epsilon", self.finite.epsilon),
            kv("seed", self.seed),
            kv("opt_starts", self.opt_starts),
            kv("output", self.output.as_deref().unwrap_or("")),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_comments() {
        let cfg = RunConfig::parse("# comment only\n\nmu = 0.5  # trailing\nbeta_deg=25\n").unwrap();
        assert_eq!(cfg.mu, 0.5);
        assert_eq!(cfg.beta_deg, 25.0);
        assert_eq!(cfg.channel.eta_d, 0.125);
        assert_eq!(cfg.channel.f_ec, 1.16);
    }

    #[test]
    fn unknown_key_names_line() {
        let err = RunConfig::parse("mu = 0.5\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, ref reason } if reason.contains("bogus")));
        assert!(RunConfig::parse("mu 0.5").is_err());
        assert!(RunConfig::parse("mu = abc").is_err());
    }

    #[test]
    fn distance_aliases() {
        let cfg = RunConfig::parse("total_distance = 100").unwrap();
        assert_eq!((cfg.channel.dist_a, cfg.channel.dist_b), (50.0, 50.0));
        let cfg = RunConfig::parse("distance_per_arm = 60").unwrap();
        assert_eq!((cfg.channel.dist_a, cfg.channel.dist_b), (60.0, 60.0));
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::parse("scheme = biased\nmode = finite\nn_pairs = 3e12\noutput = out.csv").unwrap();
        cfg.apply_overrides(&["epsilon=1e-8", "variant = original"]).unwrap();
        let again = RunConfig::parse(&cfg.echo().join("\n")).unwrap();
        assert_eq!(again.protocol().unwrap(), cfg.protocol().unwrap());
        assert_eq!(again.echo(), cfg.echo());
        assert_eq!(again.finite.n_pairs, 3_000_000_000_000);
    }

    #[test]
    fn prefactors_follow_mode() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.resolved_prefactors(), Prefactors::Unit);
        let cfg = RunConfig::parse("mode = finite").unwrap();
        assert_eq!(cfg.resolved_prefactors(), Prefactors::Sampling);
    }
}
