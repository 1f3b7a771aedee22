//! Observed gains indexed by basis pair and intensity labels, either as
//! exact values or as confidence intervals.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BasisPair, GainErrorRecord};
use crate::protocol::IntensityLabel;

/// `(basis pair, Alice's intensity, Bob's intensity)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CellKey {
    pub basis: BasisPair,
    pub a: IntensityLabel,
    pub b: IntensityLabel,
}

impl CellKey {
    pub fn new(basis: BasisPair, a: IntensityLabel, b: IntensityLabel) -> Self {
        Self { basis, a, b }
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}/{}", self.basis, self.a, self.b)
    }
}

/// Which rate of a cell an estimator reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Gain,
    ErrorGain,
    /// `Q − EQ`; replaces the error gain of a flipped basis pair.
    CorrectGain,
}

/// Confidence interval on an expected rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundedObservable {
    pub lower: f64,
    pub upper: f64,
}

impl BoundedObservable {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) {
            return Err(Error::NonFinite("BoundedObservable"));
        }
        if !(0.0 <= lower && lower <= upper && upper <= 1.0) {
            return Err(Error::invalid("bounded observable", format!("[{lower}, {upper}] is not inside [0, 1]")));
        }
        Ok(Self { lower, upper })
    }

    pub fn exact(value: f64) -> Self {
        Self { lower: value, upper: value }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// Read access shared by exact and interval-valued tables.
pub trait ObservableSource {
    /// Interval on one observable of one cell.
    fn interval(&self, key: &CellKey, observable: Observable) -> Result<BoundedObservable>;

    /// Central gain and error gain, used for flip decisions.
    fn point(&self, key: &CellKey) -> Result<GainErrorRecord>;

    /// Whether intervals have non-zero width, i.e. whether each one used
    /// carries a failure probability.
    fn is_exact(&self) -> bool;
}

/// Exact gains and error gains: the `M^{λ_A λ_B}` of the decoy estimators.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ObservableTable {
    cells: BTreeMap<CellKey, GainErrorRecord>,
}

impl ObservableTable {
    pub fn insert(&mut self, key: CellKey, record: GainErrorRecord) {
        self.cells.insert(key, record);
    }

    pub fn get(&self, key: &CellKey) -> Option<&GainErrorRecord> {
        self.cells.get(key)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellKey, &GainErrorRecord)> {
        self.cells.iter()
    }
}

impl FromIterator<(CellKey, GainErrorRecord)> for ObservableTable {
    fn from_iter<I: IntoIterator<Item = (CellKey, GainErrorRecord)>>(iter: I) -> Self {
        Self { cells: iter.into_iter().collect() }
    }
}

impl ObservableSource for ObservableTable {
    fn interval(&self, key: &CellKey, observable: Observable) -> Result<BoundedObservable> {
        let r = self.point(key)?;
        Ok(BoundedObservable::exact(match observable {
            Observable::Gain => r.q,
            Observable::ErrorGain => r.eq,
            Observable::CorrectGain => r.q - r.eq,
        }))
    }

    fn point(&self, key: &CellKey) -> Result<GainErrorRecord> {
        self.cells.get(key).copied().ok_or(Error::MissingCell(*key))
    }

    fn is_exact(&self) -> bool {
        true
    }
}

/// Intervals for every observable of one cell, plus the observed rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundedCell {
    pub gain: BoundedObservable,
    pub error_gain: BoundedObservable,
    pub correct_gain: BoundedObservable,
    pub observed: GainErrorRecord,
}

/// Interval-valued table produced from finite counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BoundedTable {
    cells: BTreeMap<CellKey, BoundedCell>,
}

impl BoundedTable {
    pub fn insert(&mut self, key: CellKey, cell: BoundedCell) {
        self.cells.insert(key, cell);
    }

    pub fn get(&self, key: &CellKey) -> Option<&BoundedCell> {
        self.cells.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellKey, &BoundedCell)> {
        self.cells.iter()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

impl ObservableSource for BoundedTable {
    fn interval(&self, key: &CellKey, observable: Observable) -> Result<BoundedObservable> {
        let c = self.cells.get(key).ok_or(Error::MissingCell(*key))?;
        Ok(match observable {
            Observable::Gain => c.gain,
            Observable::ErrorGain => c.error_gain,
            Observable::CorrectGain => c.correct_gain,
        })
    }

    fn point(&self, key: &CellKey) -> Result<GainErrorRecord> {
        self.cells.get(key).map(|c| c.observed).ok_or(Error::MissingCell(*key))
    }

    fn is_exact(&self) -> bool {
        false
    }
}
