//! Protocol variants, intensity schemes and basis/intensity sampling.

use std::fmt;

use serde::Serialize;

use crate::error::{check_probability, Error, Result};
use crate::model::{Basis, BasisPair, MisalignmentAngle};
use crate::observables::CellKey;
use crate::security::RfiBound;

/// Which security analysis bounds Eve's information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Reference-frame-independent: X and Y bases, information bounded by `C`.
    Rfi,
    /// Original MDI: X basis only, information bounded by `H(e_XX)`.
    Original,
}

impl Variant {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rfi" | "r-mdi" | "rmdi" => Some(Variant::Rfi),
            "original" | "mdi" | "o-mdi" | "omdi" => Some(Variant::Original),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Rfi => "rfi",
            Variant::Original => "original",
        }
    }

    /// Basis pairs other than ZZ whose statistics the variant uses.
    pub fn test_pairs(self) -> &'static [BasisPair] {
        match self {
            Variant::Rfi => &BasisPair::CORRELATION_SET,
            Variant::Original => &[BasisPair::XX],
        }
    }

    fn x_like_bases(self) -> f64 {
        match self {
            Variant::Rfi => 2.0,
            Variant::Original => 1.0,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Intensity label as it appears in count records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityLabel {
    Mu,
    Nu,
    MuZ,
    MuX,
    NuX,
    #[serde(rename = "o")]
    Vacuum,
}

impl IntensityLabel {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mu" => Some(IntensityLabel::Mu),
            "nu" => Some(IntensityLabel::Nu),
            "mu_z" => Some(IntensityLabel::MuZ),
            "mu_x" => Some(IntensityLabel::MuX),
            "nu_x" => Some(IntensityLabel::NuX),
            "o" => Some(IntensityLabel::Vacuum),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IntensityLabel::Mu => "mu",
            IntensityLabel::Nu => "nu",
            IntensityLabel::MuZ => "mu_z",
            IntensityLabel::MuX => "mu_x",
            IntensityLabel::NuX => "nu_x",
            IntensityLabel::Vacuum => "o",
        }
    }
}

impl fmt::Display for IntensityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Intensity levels. The vacuum is always exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum IntensitySettings {
    /// Three intensities `μ, ν, 0` shared by every basis.
    Symmetric { mu: f64, nu: f64 },
    /// Four intensities: `μ_z` in Z only, `μ_x, ν_x` in X/Y, plus vacuum.
    Biased { mu_z: f64, mu_x: f64, nu_x: f64 },
}

impl IntensitySettings {
    pub fn validate(&self) -> Result<()> {
        let (signals, mu_x, nu_x): (&[(&str, f64)], f64, f64) = match self {
            IntensitySettings::Symmetric { mu, nu } => (&[("mu", *mu)], *mu, *nu),
            IntensitySettings::Biased { mu_z, mu_x, nu_x } => {
                if !(*mu_z > 0.0 && mu_z.is_finite()) {
                    return Err(Error::invalid("mu_z", "signal intensity must be positive and finite"));
                }
                (&[("mu_x", *mu_x)], *mu_x, *nu_x)
            }
        };
        for &(name, mu) in signals {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::invalid(name, "signal intensity must be positive and finite"));
            }
        }
        if !(nu_x > 0.0 && nu_x < mu_x) {
            return Err(Error::InvalidSettings(format!(
                "decoy intensity {nu_x} must lie strictly between 0 and the signal intensity {mu_x}"
            )));
        }
        Ok(())
    }

    /// Intensity actually sent in the Z basis.
    pub fn mu_z(&self) -> f64 {
        match *self {
            IntensitySettings::Symmetric { mu, .. } => mu,
            IntensitySettings::Biased { mu_z, .. } => mu_z,
        }
    }

    pub fn mu_x(&self) -> f64 {
        match *self {
            IntensitySettings::Symmetric { mu, .. } => mu,
            IntensitySettings::Biased { mu_x, .. } => mu_x,
        }
    }

    pub fn nu_x(&self) -> f64 {
        match *self {
            IntensitySettings::Symmetric { nu, .. } => nu,
            IntensitySettings::Biased { nu_x, .. } => nu_x,
        }
    }

    pub fn is_biased(&self) -> bool {
        matches!(self, IntensitySettings::Biased { .. })
    }

    /// Labels of the signal and decoy intensities used in X/Y.
    pub fn x_labels(&self) -> (IntensityLabel, IntensityLabel) {
        match self {
            IntensitySettings::Symmetric { .. } => (IntensityLabel::Mu, IntensityLabel::Nu),
            IntensitySettings::Biased { .. } => (IntensityLabel::MuX, IntensityLabel::NuX),
        }
    }

    /// Label of the Z-basis signal intensity.
    pub fn z_label(&self) -> IntensityLabel {
        match self {
            IntensitySettings::Symmetric { .. } => IntensityLabel::Mu,
            IntensitySettings::Biased { .. } => IntensityLabel::MuZ,
        }
    }

    /// Every label of the scheme, vacuum last.
    pub fn labels(&self) -> &'static [IntensityLabel] {
        match self {
            IntensitySettings::Symmetric { .. } => &[IntensityLabel::Mu, IntensityLabel::Nu, IntensityLabel::Vacuum],
            IntensitySettings::Biased { .. } => {
                &[IntensityLabel::MuZ, IntensityLabel::MuX, IntensityLabel::NuX, IntensityLabel::Vacuum]
            }
        }
    }

    /// Maps aliases onto this scheme's labels (`mu_z` → `mu` in the
    /// symmetric scheme). `mu`/`nu` are ambiguous in the biased scheme.
    pub fn canonical(&self, label: IntensityLabel) -> Result<IntensityLabel> {
        use IntensityLabel::*;
        let resolved = match (self, label) {
            (_, Vacuum) => Some(Vacuum),
            (IntensitySettings::Symmetric { .. }, Mu | MuZ | MuX) => Some(Mu),
            (IntensitySettings::Symmetric { .. }, Nu | NuX) => Some(Nu),
            (IntensitySettings::Biased { .. }, MuZ | MuX | NuX) => Some(label),
            (IntensitySettings::Biased { .. }, Mu | Nu) => None,
        };
        resolved.ok_or_else(|| {
            Error::InvalidSettings(format!("intensity label `{label}` is not defined for the biased scheme"))
        })
    }

    pub fn intensity(&self, label: IntensityLabel) -> Result<f64> {
        Ok(match self.canonical(label)? {
            IntensityLabel::Vacuum => 0.0,
            IntensityLabel::Mu | IntensityLabel::MuZ => self.mu_z(),
            IntensityLabel::MuX => self.mu_x(),
            IntensityLabel::Nu | IntensityLabel::NuX => self.nu_x(),
        })
    }
}

/// Per-party sampling probabilities.
///
/// Each party picks Z with `p_z`, each X-like basis with `p_x`, and sends the
/// vacuum with the remainder `1 − p_z − k·p_x` (`k` = 2 with Y, 1 without).
/// Within X/Y the signal is chosen with `p_x_signal`. In the symmetric scheme
/// the Z basis uses the same signal fraction; in the biased scheme Z always
/// carries `μ_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sampling {
    pub p_z: f64,
    pub p_x: f64,
    pub p_x_signal: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self { p_z: 0.26, p_x: 0.27, p_x_signal: 0.14 }
    }
}

/// How the `P_zz · P_zz^{μμ}` factor of the key rate is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Prefactors {
    /// Both factors one: rate per sifted signal-signal Z pair.
    Unit,
    /// Derived from [`Sampling`]: rate per transmitted pulse pair.
    Sampling,
}

impl Prefactors {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "unit" => Some(Prefactors::Unit),
            "sampling" => Some(Prefactors::Sampling),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Prefactors::Unit => "unit",
            Prefactors::Sampling => "sampling",
        }
    }
}

/// Everything about the protocol other than the channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub variant: Variant,
    pub intensities: IntensitySettings,
    pub sampling: Sampling,
    pub prefactors: Prefactors,
    pub beta: MisalignmentAngle,
    pub rfi_bound: RfiBound,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Rfi,
            intensities: IntensitySettings::Symmetric { mu: 0.67, nu: 0.01 },
            sampling: Sampling::default(),
            prefactors: Prefactors::Unit,
            beta: MisalignmentAngle::default(),
            rfi_bound: RfiBound::SquareRoot,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        self.intensities.validate()?;
        let s = &self.sampling;
        check_probability("p_z", s.p_z)?;
        check_probability("p_x", s.p_x)?;
        check_probability("p_x_signal", s.p_x_signal)?;
        if self.vacuum_probability() < -1e-15 {
            return Err(Error::InvalidSettings(format!(
                "p_z + {}·p_x = {} exceeds one",
                self.variant.x_like_bases(),
                s.p_z + self.variant.x_like_bases() * s.p_x
            )));
        }
        if !self.beta.radians().is_finite() {
            return Err(Error::NonFinite("beta"));
        }
        Ok(())
    }

    pub fn intensity(&self, label: IntensityLabel) -> Result<f64> {
        self.intensities.intensity(label)
    }

    /// Probability of one party sending the vacuum.
    pub fn vacuum_probability(&self) -> f64 {
        1.0 - self.sampling.p_z - self.variant.x_like_bases() * self.sampling.p_x
    }

    /// Probability that one party prepares `(basis, label)`. The vacuum is
    /// basis-less, so its probability does not depend on `basis`.
    pub fn label_probability(&self, basis: Basis, label: IntensityLabel) -> Result<f64> {
        let label = self.intensities.canonical(label)?;
        if label == IntensityLabel::Vacuum {
            return Ok(self.vacuum_probability().max(0.0));
        }
        let s = &self.sampling;
        let biased = self.intensities.is_biased();
        let basis_p = match basis {
            Basis::Z => s.p_z,
            Basis::X => s.p_x,
            Basis::Y if self.variant == Variant::Rfi => s.p_x,
            Basis::Y => 0.0,
        };
        let fraction = match (basis, label, biased) {
            (Basis::Z, IntensityLabel::MuZ, true) => 1.0,
            (Basis::Z, _, true) => 0.0,
            (_, IntensityLabel::MuZ, _) => 0.0,
            (_, IntensityLabel::Mu | IntensityLabel::MuX, _) => s.p_x_signal,
            (_, IntensityLabel::Nu | IntensityLabel::NuX, _) => 1.0 - s.p_x_signal,
            (_, IntensityLabel::Vacuum, _) => unreachable!(),
        };
        Ok(basis_p * fraction)
    }

    /// `(P_zz, P_zz^{μμ})` of the key-rate formula.
    pub fn prefactor_values(&self) -> (f64, f64) {
        match self.prefactors {
            Prefactors::Unit => (1.0, 1.0),
            Prefactors::Sampling => {
                let s = &self.sampling;
                let signal = if self.intensities.is_biased() { 1.0 } else { s.p_x_signal * s.p_x_signal };
                (s.p_z * s.p_z, signal)
            }
        }
    }

    /// Every `(basis pair, intensity pair)` cell the estimators read.
    pub fn required_cells(&self) -> Vec<CellKey> {
        use IntensityLabel::Vacuum as O;
        let decoy_cells = |basis: BasisPair, s: IntensityLabel, d: IntensityLabel| {
            [(d, d), (O, s), (s, O), (s, s), (O, O), (O, d), (d, O)].map(|(a, b)| CellKey::new(basis, a, b))
        };
        let (s, d) = self.intensities.x_labels();
        let mut cells = Vec::new();
        match self.intensities {
            IntensitySettings::Symmetric { .. } => cells.extend(decoy_cells(BasisPair::ZZ, s, d)),
            IntensitySettings::Biased { .. } => {
                let z = self.intensities.z_label();
                cells.extend([(z, z), (O, z), (z, O), (O, O)].map(|(a, b)| CellKey::new(BasisPair::ZZ, a, b)));
            }
        }
        for &pair in self.variant.test_pairs() {
            cells.extend(decoy_cells(pair, s, d));
        }
        cells.sort();
        cells.dedup();
        cells
    }
}
