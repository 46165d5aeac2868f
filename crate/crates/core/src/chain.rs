//! Running independent Markov chains and pooling their measurements.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::{chain_rng, derive_chain_seed, RngState};
use crate::stats::{self, ComplexEstimate, Estimate, StatsError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("invalid chain configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub sweeps: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub n_chains: usize,
    pub seed: u64,
}

impl ChainConfig {
    /// Defaults: burn-in 20% of sweeps, thinning 1, four chains.
    pub fn new(sweeps: u64, seed: u64) -> Self {
        Self {
            sweeps,
            burn_in: sweeps / 5,
            thinning: 1,
            n_chains: 4,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        if self.sweeps <= self.burn_in {
            return Err(ChainError::InvalidConfig(format!(
                "sweeps ({}) must exceed burn_in ({})",
                self.sweeps, self.burn_in
            )));
        }
        if self.thinning == 0 {
            return Err(ChainError::InvalidConfig("thinning must be >= 1".into()));
        }
        if self.n_chains == 0 {
            return Err(ChainError::InvalidConfig("n_chains must be >= 1".into()));
        }
        Ok(())
    }

    pub fn measurements_per_chain(&self) -> u64 {
        (self.sweeps - self.burn_in) / self.thinning
    }

    /// Whether a measurement follows sweep `s` (1-based).
    pub fn measures_after(&self, s: u64) -> bool {
        s > self.burn_in && (s - self.burn_in) % self.thinning == 0
    }
}

/// A Markov chain with a fixed list of real-valued observables.
pub trait Chain: Send {
    fn n_observables(&self) -> usize;

    /// One sweep. `burn_in` is true before measurements start; samplers
    /// may adapt their proposals only then.
    fn sweep(&mut self, rng: &mut ChaCha8Rng, burn_in: bool);

    fn measure(&mut self, out: &mut [f64]);

    /// Acceptance rate over the post-burn-in sweeps, for Metropolis chains.
    fn acceptance(&self) -> Option<f64> {
        None
    }
}

/// All measurements of one chain, column per observable.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub chain: usize,
    pub seed: [u8; 32],
    pub sweeps: Vec<u64>,
    pub columns: Vec<Vec<f64>>,
    pub acceptance: Option<f64>,
    /// Generator state after the last sweep, for checkpoints.
    pub final_rng: RngState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub traces: Vec<ChainTrace>,
}

impl RunOutput {
    pub fn column(&self, k: usize) -> Vec<&[f64]> {
        self.traces.iter().map(|t| t.columns[k].as_slice()).collect()
    }

    pub fn estimate(&self, k: usize) -> Result<Estimate, StatsError> {
        stats::estimate(&self.column(k))
    }

    pub fn complex_estimate(&self, re: usize, im: usize) -> Result<ComplexEstimate, StatsError> {
        Ok(ComplexEstimate {
            re: self.estimate(re)?,
            im: self.estimate(im)?,
        })
    }

    /// Mean acceptance over chains, if the chains report one.
    pub fn acceptance(&self) -> Option<f64> {
        let rates: Vec<f64> = self.traces.iter().filter_map(|t| t.acceptance).collect();
        (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
    }

    pub fn n_samples(&self) -> usize {
        self.traces.iter().map(|t| t.sweeps.len()).sum()
    }
}

/// Runs one chain from its derived rng: `make` builds the initial state, then
/// `cfg.sweeps` sweeps follow.
pub fn run_one<C, F>(cfg: &ChainConfig, index: usize, make: &F) -> (ChainTrace, C)
where
    C: Chain,
    F: Fn(usize, &mut ChaCha8Rng) -> C,
{
    let mut rng = chain_rng(cfg.seed, index as u64);
    let mut state = make(index, &mut rng);
    let k = state.n_observables();
    let m = cfg.measurements_per_chain() as usize;
    let mut columns = vec![Vec::with_capacity(m); k];
    let mut sweeps = Vec::with_capacity(m);
    let mut buf = vec![0.0; k];
    for s in 1..=cfg.sweeps {
        state.sweep(&mut rng, s <= cfg.burn_in);
        if cfg.measures_after(s) {
            state.measure(&mut buf);
            for (col, &v) in columns.iter_mut().zip(&buf) {
                col.push(v);
            }
            sweeps.push(s);
        }
    }
    let trace = ChainTrace {
        chain: index,
        seed: derive_chain_seed(cfg.seed, index as u64),
        sweeps,
        columns,
        acceptance: state.acceptance(),
        final_rng: RngState::capture(&rng),
    };
    (trace, state)
}

/// Runs `cfg.n_chains` chains in parallel and returns their traces together
/// with the final chain states, in chain order.
pub fn run_chains_with_states<C, F>(
    cfg: &ChainConfig,
    make: F,
) -> Result<(RunOutput, Vec<C>), ChainError>
where
    C: Chain,
    F: Fn(usize, &mut ChaCha8Rng) -> C + Sync,
{
    cfg.validate()?;
    let (traces, states): (Vec<_>, Vec<_>) = (0..cfg.n_chains)
        .into_par_iter()
        .map(|i| run_one(cfg, i, &make))
        .collect::<Vec<_>>()
        .into_iter()
        .unzip();
    Ok((RunOutput { traces }, states))
}

pub fn run_chains<C, F>(cfg: &ChainConfig, make: F) -> Result<RunOutput, ChainError>
where
    C: Chain,
    F: Fn(usize, &mut ChaCha8Rng) -> C + Sync,
{
    run_chains_with_states(cfg, make).map(|(out, _)| out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    struct Walk {
        x: f64,
    }

    impl Chain for Walk {
        fn n_observables(&self) -> usize {
            2
        }
        fn sweep(&mut self, rng: &mut ChaCha8Rng, _burn_in: bool) {
            self.x = 0.5 * self.x + rng.random::<f64>() - 0.5;
        }
        fn measure(&mut self, out: &mut [f64]) {
            out[0] = self.x;
            out[1] = 1.0;
        }
    }

    fn cfg(n_chains: usize) -> ChainConfig {
        ChainConfig {
            sweeps: 1000,
            burn_in: 100,
            thinning: 3,
            n_chains,
            seed: 9,
        }
    }

    #[test]
    fn measurement_schedule() {
        let c = cfg(1);
        assert_eq!(c.measurements_per_chain(), 300);
        let out = run_chains(&c, |_, _| Walk { x: 0.0 }).unwrap();
        assert_eq!(out.traces[0].sweeps.len(), 300);
        assert_eq!(out.traces[0].sweeps[0], 103);
        assert_eq!(*out.traces[0].sweeps.last().unwrap(), 1000);
    }

    #[test]
    fn constant_observable() {
        let out = run_chains(&cfg(2), |_, _| Walk { x: 0.0 }).unwrap();
        let e = out.estimate(1).unwrap();
        assert_eq!((e.mean, e.stderr), (1.0, 0.0));
    }

    #[test]
    fn adding_chains_keeps_existing_traces() {
        let two = run_chains(&cfg(2), |_, _| Walk { x: 0.0 }).unwrap();
        let four = run_chains(&cfg(4), |_, _| Walk { x: 0.0 }).unwrap();
        assert_eq!(two.traces[..], four.traces[..2]);
        assert_ne!(four.traces[0].columns, four.traces[1].columns);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = cfg(1);
        c.burn_in = c.sweeps;
        assert!(c.validate().is_err());
        let mut c = cfg(1);
        c.thinning = 0;
        assert!(c.validate().is_err());
        let mut c = cfg(0);
        c.n_chains = 0;
        assert!(run_chains(&c, |_, _| Walk { x: 0.0 }).is_err());
    }
}
