//! Finite-size analysis: Chernoff intervals on every observed count,
//! propagated through the decoy estimators.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{cell_observables, ChannelParams, GainErrorRecord};
use crate::observables::{BoundedCell, BoundedObservable, BoundedTable, CellKey, ObservableTable};
use crate::pipeline::evaluate_key_rate;
use crate::protocol::ProtocolConfig;
use crate::security::KeyRateReport;

/// Sample size and per-bound failure probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteKeyConfig {
    /// Transmitted pulse pairs, before sifting.
    pub n_pairs: u64,
    pub epsilon: f64,
}

impl Default for FiniteKeyConfig {
    fn default() -> Self {
        Self { n_pairs: 3_000_000_000_000, epsilon: 1e-10 }
    }
}

impl FiniteKeyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pairs == 0 {
            return Err(Error::invalid("n_pairs", "must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid("epsilon", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Interval on the expectation of a count `k` out of `n`, as rates.
///
/// With `β = ln(1/ε)` the expected count lies in
/// `[k − sqrt(2kβ), k + β + sqrt(2kβ + β²)]`, floored at 0 and capped at `n`.
pub fn chernoff_interval(k: u64, n: u64, epsilon: f64) -> Result<BoundedObservable> {
    if n == 0 {
        return Err(Error::invalid("n", "sample size must be positive"));
    }
    if k > n {
        return Err(Error::invalid("k", format!("count {k} exceeds sample size {n}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid("epsilon", "must lie in (0, 1)"));
    }
    let beta = -epsilon.ln();
    let (k, n) = (k as f64, n as f64);
    let lower = (k - (2.0 * k * beta).sqrt()).max(0.0);
    let upper = (k + beta + (2.0 * k * beta + beta * beta).sqrt()).min(n);
    Ok(BoundedObservable { lower: lower / n, upper: upper / n })
}

/// Counts for one cell, split by the announced Bell state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CellCounts {
    pub pairs_sent: u64,
    pub psi_plus: u64,
    pub psi_minus: u64,
    pub err_psi_plus: u64,
    pub err_psi_minus: u64,
}

impl CellCounts {
    pub fn coincidences(&self) -> u64 {
        self.psi_plus + self.psi_minus
    }

    pub fn errors(&self) -> u64 {
        self.err_psi_plus + self.err_psi_minus
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.err_psi_plus > self.psi_plus || self.err_psi_minus > self.psi_minus {
            return Err("error counts exceed coincidence counts".into());
        }
        if self.pairs_sent == 0 {
            return Err("pairs_sent must be positive".into());
        }
        if self.coincidences() > self.pairs_sent {
            return Err("coincidences exceed pairs_sent".into());
        }
        Ok(())
    }

    fn split(pairs_sent: u64, coincidences: u64, errors: u64) -> Self {
        let plus = coincidences - coincidences / 2;
        let err_plus = (errors - errors / 2).min(plus);
        Self {
            pairs_sent,
            psi_plus: plus,
            psi_minus: coincidences - plus,
            err_psi_plus: err_plus,
            err_psi_minus: errors - err_plus,
        }
    }
}

/// Observed counts per cell.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CountsTable {
    cells: BTreeMap<CellKey, CellCounts>,
}

impl CountsTable {
    pub fn insert(&mut self, key: CellKey, counts: CellCounts) {
        self.cells.insert(key, counts);
    }

    pub fn get(&self, key: &CellKey) -> Option<&CellCounts> {
        self.cells.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellKey, &CellCounts)> {
        self.cells.iter()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    fn required<'a>(&'a self, protocol: &ProtocolConfig) -> Result<Vec<(CellKey, &'a CellCounts)>> {
        protocol
            .required_cells()
            .into_iter()
            .map(|k| self.cells.get(&k).map(|c| (k, c)).ok_or(Error::MissingCell(k)))
            .collect()
    }
}

fn rate(k: u64, n: u64) -> f64 {
    k as f64 / n as f64
}

fn checked(key: &CellKey, c: &CellCounts) -> Result<()> {
    c.validate().map_err(|reason| Error::invalid(format!("counts for {key}"), reason))
}

/// Replaces every gain, error gain and correct gain of the protocol's
/// cells by its Chernoff interval.
pub fn apply_fluctuations(
    counts: &CountsTable,
    protocol: &ProtocolConfig,
    config: &FiniteKeyConfig,
) -> Result<BoundedTable> {
    config.validate()?;
    let mut table = BoundedTable::default();
    for (key, c) in counts.required(protocol)? {
        checked(&key, c)?;
        let n = c.pairs_sent;
        table.insert(
            key,
            BoundedCell {
                gain: chernoff_interval(c.coincidences(), n, config.epsilon)?,
                error_gain: chernoff_interval(c.errors(), n, config.epsilon)?,
                correct_gain: chernoff_interval(c.coincidences() - c.errors(), n, config.epsilon)?,
                observed: GainErrorRecord::new(rate(c.coincidences(), n), rate(c.errors(), n)),
            },
        );
    }
    Ok(table)
}

/// Observed rates `k/n` without fluctuation bounds.
pub fn point_table(counts: &CountsTable, protocol: &ProtocolConfig) -> Result<ObservableTable> {
    counts
        .required(protocol)?
        .into_iter()
        .map(|(key, c)| {
            checked(&key, c)?;
            Ok((key, GainErrorRecord::new(rate(c.coincidences(), c.pairs_sent), rate(c.errors(), c.pairs_sent))))
        })
        .collect()
}

/// Key rate from counts, taking the worst-case end of every interval.
pub fn finite_key_rate(
    counts: &CountsTable,
    config: &FiniteKeyConfig,
    protocol: &ProtocolConfig,
    params: &ChannelParams,
) -> Result<KeyRateReport> {
    protocol.validate()?;
    params.validate()?;
    let bounded = apply_fluctuations(counts, protocol, config)?;
    evaluate_key_rate(&bounded, protocol, params.f_ec, Some(config))
}

fn pairs_sent(protocol: &ProtocolConfig, key: &CellKey, n_pairs: u64) -> Result<u64> {
    let (ba, bb) = key.basis.parts();
    let p = protocol.label_probability(ba, key.a)? * protocol.label_probability(bb, key.b)?;
    let sent = (n_pairs as f64 * p).round() as u64;
    if sent == 0 {
        return Err(Error::InvalidSettings(format!("cell {key} receives no pulse pairs out of {n_pairs}")));
    }
    Ok(sent)
}

/// Counts equal to their model expectations, rounded to integers.
pub fn synthesize_counts(protocol: &ProtocolConfig, params: &ChannelParams, n_pairs: u64) -> Result<CountsTable> {
    protocol.validate()?;
    let mut table = CountsTable::default();
    for key in protocol.required_cells() {
        let sent = pairs_sent(protocol, &key, n_pairs)?;
        let r = cell_observables(protocol, params, &key)?;
        let coincidences = ((sent as f64) * r.q).round() as u64;
        let errors = (((sent as f64) * r.eq).round() as u64).min(coincidences);
        table.insert(key, CellCounts::split(sent, coincidences, errors));
    }
    Ok(table)
}

/// Binomially sampled counts. Each cell draws from its own stream, so the
/// result does not depend on iteration order.
pub fn sample_counts(
    protocol: &ProtocolConfig,
    params: &ChannelParams,
    n_pairs: u64,
    seed: u64,
) -> Result<CountsTable> {
    protocol.validate()?;
    let mut table = CountsTable::default();
    for (stream, key) in protocol.required_cells().into_iter().enumerate() {
        let sent = pairs_sent(protocol, &key, n_pairs)?;
        let r = cell_observables(protocol, params, &key)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream as u64);
        let draw = |n: u64, p: f64, rng: &mut ChaCha8Rng| -> Result<u64> {
            Ok(Binomial::new(n, p.clamp(0.0, 1.0)).map_err(|e| Error::invalid("binomial", e.to_string()))?.sample(rng))
        };
        let coincidences = draw(sent, r.q, &mut rng)?;
        let error_fraction = if r.q > 0.0 { r.eq / r.q } else { 0.0 };
        let plus = draw(coincidences, 0.5, &mut rng)?;
        let err_plus = draw(plus, error_fraction, &mut rng)?;
        let err_minus = draw(coincidences - plus, error_fraction, &mut rng)?;
        table.insert(
            key,
            CellCounts {
                pairs_sent: sent,
                psi_plus: plus,
                psi_minus: coincidences - plus,
                err_psi_plus: err_plus,
                err_psi_minus: err_minus,
            },
        );
    }
    Ok(table)
}
