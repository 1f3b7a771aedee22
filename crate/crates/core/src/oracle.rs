//! Brute-force reference computations for tests. Nothing here shares
//! numerics with the modules it checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{BasisPair, GainErrorRecord};
use crate::observables::{BoundedObservable, CellKey, ObservableTable};
use crate::protocol::IntensitySettings;

const QUADRATURE_NODES: usize = 4096;

/// Photon numbers `n + m` above this are dropped from fixtures.
pub const MAX_PHOTONS: usize = 20;

const TAIL_LIMIT: f64 = 1e-12;

/// `I0(z) = (1/2π) ∮ exp(z·cos φ) dφ` by the trapezoidal rule, which
/// converges geometrically for periodic analytic integrands.
pub fn i0_by_quadrature(z: f64) -> f64 {
    let z = z.abs();
    let step = std::f64::consts::TAU / QUADRATURE_NODES as f64;
    let sum: f64 = (0..QUADRATURE_NODES).map(|k| (z * (k as f64 * step).cos()).exp()).sum();
    sum / QUADRATURE_NODES as f64
}

/// Yields `Y_nm` and error rates `e_nm` per photon-number pair.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldGrid {
    pub yields: Vec<Vec<f64>>,
    pub errors: Vec<Vec<f64>>,
}

impl YieldGrid {
    pub fn from_fn(mut f: impl FnMut(usize, usize) -> (f64, f64)) -> Self {
        let mut yields = vec![vec![0.0; MAX_PHOTONS + 1]; MAX_PHOTONS + 1];
        let mut errors = yields.clone();
        for n in 0..=MAX_PHOTONS {
            for m in 0..=MAX_PHOTONS {
                let (y, e) = f(n, m);
                yields[n][m] = y;
                errors[n][m] = e;
            }
        }
        Self { yields, errors }
    }

    pub fn constant(y: f64, e: f64) -> Self {
        Self::from_fn(|_, _| (y, e))
    }

    fn validate(&self) -> Result<()> {
        let ok = |g: &Vec<Vec<f64>>| {
            g.len() == MAX_PHOTONS + 1
                && g.iter().all(|r| r.len() == MAX_PHOTONS + 1 && r.iter().all(|v| (0.0..=1.0).contains(v)))
        };
        if ok(&self.yields) && ok(&self.errors) {
            Ok(())
        } else {
            Err(Error::invalid("grid", format!("must be {0}×{0} with entries in [0, 1]", MAX_PHOTONS + 1)))
        }
    }
}

fn poisson_weights(lambda: f64) -> Vec<f64> {
    let mut w = Vec::with_capacity(MAX_PHOTONS + 1);
    let mut p = (-lambda).exp();
    for n in 0..=MAX_PHOTONS {
        if n > 0 {
            p *= lambda / n as f64;
        }
        w.push(p);
    }
    w
}

/// Probability that a Poisson variable of mean `lambda` exceeds `MAX_PHOTONS`,
/// summed upward from the first omitted term.
fn poisson_tail(lambda: f64) -> f64 {
    let mut p = (-lambda).exp();
    for n in 1..=MAX_PHOTONS + 1 {
        p *= lambda / n as f64;
    }
    let mut tail = 0.0;
    for n in MAX_PHOTONS + 2..MAX_PHOTONS + 200 {
        tail += p;
        p *= lambda / n as f64;
        if p < tail * 1e-17 {
            break;
        }
    }
    tail
}

/// Gains and error gains of a photon-number mixture,
/// `Q^{λλ′} = Σ_{n+m≤20} P(n; λ)·P(m; λ′)·Y_nm` and `EQ` with `e_nm·Y_nm`,
/// for every basis pair and every pair of the scheme's intensity labels.
pub fn synthetic_decoy_fixture(grid: &YieldGrid, settings: &IntensitySettings) -> Result<ObservableTable> {
    grid.validate()?;
    let labels = settings.labels();
    let mut table = ObservableTable::default();
    for &la in labels {
        for &lb in labels {
            let (lambda_a, lambda_b) = (settings.intensity(la)?, settings.intensity(lb)?);
            // The total photon number of both pulses is Poisson(λ + λ′).
            let tail = poisson_tail(lambda_a + lambda_b);
            if tail >= TAIL_LIMIT {
                return Err(Error::invalid(
                    "fixture",
                    format!(
                        "truncation tail {tail:e} at intensities ({lambda_a}, {lambda_b}) is not below {TAIL_LIMIT:e}"
                    ),
                ));
            }
            let (wa, wb) = (poisson_weights(lambda_a), poisson_weights(lambda_b));
            let (mut q, mut eq) = (0.0, 0.0);
            #[allow(clippy::needless_range_loop)]
            for n in 0..=MAX_PHOTONS {
                for m in 0..=MAX_PHOTONS - n {
                    let w = wa[n] * wb[m] * grid.yields[n][m];
                    q += w;
                    eq += w * grid.errors[n][m];
                }
            }
            for basis in BasisPair::ALL {
                table.insert(CellKey::new(basis, la, lb), GainErrorRecord::new(q, eq));
            }
        }
    }
    Ok(table)
}

/// Fraction of trials in which `interval(k, n, ε)` misses the true rate `p`
/// for `k ~ Binomial(n, p)`. Trials run in fixed-size chunks, each with its
/// own stream of a seeded generator.
pub fn coverage_check<F>(interval: F, trials: u64, n: u64, p: f64, epsilon: f64, seed: u64) -> Result<f64>
where
    F: Fn(u64, u64, f64) -> Result<BoundedObservable> + Sync,
{
    const CHUNK: u64 = 4096;
    let binomial = Binomial::new(n, p).map_err(|e| Error::invalid("p", e.to_string()))?;
    let chunks = trials.div_ceil(CHUNK);
    let misses = (0..chunks)
        .into_par_iter()
        .map(|chunk| -> Result<u64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let count = CHUNK.min(trials - chunk * CHUNK);
            let mut misses = 0;
            for _ in 0..count {
                let k = binomial.sample(&mut rng);
                if !interval(k, n, epsilon)?.contains(p) {
                    misses += 1;
                }
            }
            Ok(misses)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(misses as f64 / trials as f64)
}
