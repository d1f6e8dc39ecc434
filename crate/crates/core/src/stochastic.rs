//! Chain-binomial stochastic realizations of the compartmental models under
//! homogeneous mixing.
//!
//! Each step, the number of hosts leaving a compartment is drawn from a
//! binomial (multinomial when a compartment has several exits, as SIIDR's I
//! does). Transition probabilities use the exponential form `1 − exp(−r·dt)`,
//! which is a valid probability for any rate; compartments with several exit
//! rates are split by competing risks so the summed exit probability stays
//! below one.
//!
//! Realization `i` of an ensemble draws from its own RNG stream seeded with
//! `seed + i`, so ensembles are reproducible and order-independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::models::{Model, RateParams, Trajectory};

/// Ensemble dimensions and base seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Number of update steps per realization.
    pub steps: usize,
    /// Base RNG seed; realization `i` uses `seed + i`.
    pub seed: u64,
    /// Number of realizations averaged by [`simulate_avg`].
    pub realizations: usize,
}

impl SimConfig {
    pub fn new(steps: usize, seed: u64, realizations: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("steps must be >= 1"));
        }
        if realizations == 0 {
            return Err(Error::invalid("realizations must be >= 1"));
        }
        Ok(Self { steps, seed, realizations })
    }
}

/// Probability of one spontaneous X→Y transition within a step: 1 − exp(−r·dt).
pub fn spontaneous_prob(rate: f64, dt: f64) -> f64 {
    1.0 - (-rate * dt).exp()
}

/// Per-step infection probability under homogeneous mixing:
/// 1 − exp(−β·(I/N)·dt).
pub fn infection_prob(beta: f64, infectious: u64, population: u64, dt: f64) -> f64 {
    1.0 - (-beta * (infectious as f64 / population as f64) * dt).exp()
}

/// Splits simultaneous exit rates over one step by competing risks: the total
/// exit probability is 1 − exp(−Σr·dt) and each exit takes its rate's share.
/// For a single rate this reduces exactly to `spontaneous_prob`.
pub fn competing_risks(rates: &[f64], dt: f64) -> Vec<f64> {
    let total: f64 = rates.iter().sum();
    if total <= 0.0 {
        return vec![0.0; rates.len()];
    }
    let p_total = 1.0 - (-total * dt).exp();
    rates.iter().map(|r| r / total * p_total).collect()
}

/// Exit probabilities of one compartment for the current step. The residual
/// `1 − Σp` is the probability of staying put.
#[derive(Debug, Clone, PartialEq)]
pub struct CompartmentExits {
    pub from: &'static str,
    /// `(target compartment, probability)` pairs.
    pub exits: Vec<(&'static str, f64)>,
}

impl CompartmentExits {
    pub fn total_exit_probability(&self) -> f64 {
        self.exits.iter().map(|(_, p)| p).sum()
    }
}

/// Exit probabilities for every compartment of `model` at integer `state`.
///
/// Infection is state-dependent (it reads the current infectious count);
/// spontaneous transitions depend only on the rates and dt.
pub fn step_probabilities(
    model: Model,
    params: &RateParams<f64>,
    state: &[u64],
) -> Result<Vec<CompartmentExits>> {
    if state.len() != model.compartment_count() {
        return Err(Error::DimensionMismatch {
            expected: model.compartment_count(),
            got: state.len(),
        });
    }
    let population: u64 = state.iter().sum();
    if population == 0 {
        return Err(Error::invalid("population must be positive"));
    }
    let infectious = state[model.infectious_index()];
    let p_inf = infection_prob(params.beta, infectious, population, params.dt);
    let dt = params.dt;

    Ok(match model {
        Model::Si => vec![
            CompartmentExits { from: "S", exits: vec![("I", p_inf)] },
            CompartmentExits { from: "I", exits: vec![] },
        ],
        Model::Sis => vec![
            CompartmentExits { from: "S", exits: vec![("I", p_inf)] },
            CompartmentExits { from: "I", exits: vec![("S", spontaneous_prob(params.mu, dt))] },
        ],
        Model::Sir => vec![
            CompartmentExits { from: "S", exits: vec![("I", p_inf)] },
            CompartmentExits { from: "I", exits: vec![("R", spontaneous_prob(params.mu, dt))] },
            CompartmentExits { from: "R", exits: vec![] },
        ],
        Model::Seir => vec![
            CompartmentExits { from: "S", exits: vec![("E", p_inf)] },
            CompartmentExits { from: "E", exits: vec![("I", spontaneous_prob(params.sigma, dt))] },
            CompartmentExits { from: "I", exits: vec![("R", spontaneous_prob(params.mu, dt))] },
            CompartmentExits { from: "R", exits: vec![] },
        ],
        Model::Siidr => {
            let split = competing_risks(&[params.mu, params.gamma1], dt);
            vec![
                CompartmentExits { from: "S", exits: vec![("I", p_inf)] },
                CompartmentExits {
                    from: "I",
                    exits: vec![("R", split[0]), ("I_D", split[1])],
                },
                CompartmentExits {
                    from: "I_D",
                    exits: vec![("I", spontaneous_prob(params.gamma2, dt))],
                },
                CompartmentExits { from: "R", exits: vec![] },
            ]
        }
    })
}

fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("checked probability").sample(rng)
}

/// Joint multinomial draw over exit events: `ps` are the per-exit
/// probabilities (summing to ≤ 1); the residual mass stays. Sampled by
/// conditional binomials, which realizes the exact joint distribution.
fn multinomial(rng: &mut ChaCha8Rng, n: u64, ps: &[f64]) -> Vec<u64> {
    let mut remaining = n;
    let mut mass_left = 1.0;
    let mut out = Vec::with_capacity(ps.len());
    for &p in ps {
        if remaining == 0 || p <= 0.0 || mass_left <= 0.0 {
            out.push(0);
            mass_left -= p;
            continue;
        }
        let k = binomial(rng, remaining, (p / mass_left).min(1.0));
        out.push(k);
        remaining -= k;
        mass_left -= p;
    }
    out
}

/// Transition rates of SIIDR's I compartment, precomputed once per run.
struct StepKernel {
    model: Model,
    p_infect_coeff: f64, // β·dt/N
    spont: Vec<f64>,     // model-specific constant exit probabilities
}

impl StepKernel {
    fn new(model: Model, params: &RateParams<f64>, population: u64) -> Self {
        let dt = params.dt;
        let spont = match model {
            Model::Si => vec![],
            Model::Sis | Model::Sir => vec![spontaneous_prob(params.mu, dt)],
            Model::Seir => {
                vec![spontaneous_prob(params.sigma, dt), spontaneous_prob(params.mu, dt)]
            }
            Model::Siidr => {
                let mut v = competing_risks(&[params.mu, params.gamma1], dt);
                v.push(spontaneous_prob(params.gamma2, dt));
                v
            }
        };
        StepKernel { model, p_infect_coeff: params.beta * dt / population as f64, spont }
    }

    fn infection_prob(&self, infectious: u64) -> f64 {
        1.0 - (-self.p_infect_coeff * infectious as f64).exp()
    }

    /// Advances `counts` by one step. All flows are drawn from the state at
    /// the beginning of the step and applied together.
    fn step(&self, counts: &mut [u64], rng: &mut ChaCha8Rng) {
        let p_inf = self.infection_prob(counts[self.model.infectious_index()]);
        match self.model {
            Model::Si => {
                let new_inf = binomial(rng, counts[0], p_inf);
                counts[0] -= new_inf;
                counts[1] += new_inf;
            }
            Model::Sis => {
                let new_inf = binomial(rng, counts[0], p_inf);
                let recovered = binomial(rng, counts[1], self.spont[0]);
                counts[0] = counts[0] - new_inf + recovered;
                counts[1] = counts[1] + new_inf - recovered;
            }
            Model::Sir => {
                let new_inf = binomial(rng, counts[0], p_inf);
                let recovered = binomial(rng, counts[1], self.spont[0]);
                counts[0] -= new_inf;
                counts[1] = counts[1] + new_inf - recovered;
                counts[2] += recovered;
            }
            Model::Seir => {
                let new_exposed = binomial(rng, counts[0], p_inf);
                let onset = binomial(rng, counts[1], self.spont[0]);
                let recovered = binomial(rng, counts[2], self.spont[1]);
                counts[0] -= new_exposed;
                counts[1] = counts[1] + new_exposed - onset;
                counts[2] = counts[2] + onset - recovered;
                counts[3] += recovered;
            }
            Model::Siidr => {
                let new_inf = binomial(rng, counts[0], p_inf);
                // I exits jointly over {recover, go dormant, stay}.
                let exits = multinomial(rng, counts[1], &self.spont[..2]);
                let woke = binomial(rng, counts[2], self.spont[2]);
                counts[0] -= new_inf;
                counts[1] = counts[1] + new_inf + woke - exits[0] - exits[1];
                counts[2] = counts[2] + exits[1] - woke;
                counts[3] += exits[0];
            }
        }
    }
}

/// One stochastic realization: integer counts per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub model: Model,
    pub dt: f64,
    /// `steps + 1` integer states, including the initial one.
    pub states: Vec<Vec<u64>>,
}

impl Realization {
    pub fn population(&self) -> u64 {
        self.states[0].iter().sum()
    }

    pub fn cumulative_infected(&self) -> Vec<u64> {
        self.states.iter().map(|s| self.model.cumulative_infected_count(s)).collect()
    }

    pub fn to_trajectory(&self) -> Trajectory<f64> {
        Trajectory {
            model: self.model,
            dt: self.dt,
            states: self
                .states
                .iter()
                .map(|s| s.iter().map(|&c| c as f64).collect())
                .collect(),
        }
    }
}

fn check_init(model: Model, init: &[u64]) -> Result<u64> {
    if init.len() != model.compartment_count() {
        return Err(Error::DimensionMismatch {
            expected: model.compartment_count(),
            got: init.len(),
        });
    }
    let population: u64 = init.iter().sum();
    if population == 0 {
        return Err(Error::invalid("population must be positive"));
    }
    Ok(population)
}

/// One chain-binomial realization seeded with `config.seed`.
pub fn simulate(
    model: Model,
    params: &RateParams<f64>,
    init: &[u64],
    config: &SimConfig,
) -> Result<Realization> {
    simulate_seeded(model, params, init, config.steps, config.seed)
}

fn simulate_seeded(
    model: Model,
    params: &RateParams<f64>,
    init: &[u64],
    steps: usize,
    seed: u64,
) -> Result<Realization> {
    let population = check_init(model, init)?;
    let kernel = StepKernel::new(model, params, population);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = init.to_vec();
    let mut states = Vec::with_capacity(steps + 1);
    states.push(counts.clone());
    for step in 0..steps {
        if model.is_absorbing(&counts) {
            // Nothing can change any more; the remaining rows repeat.
            states.resize(steps + 1, counts.clone());
            debug_assert_eq!(states.len(), steps + 1);
            let _ = step;
            break;
        }
        kernel.step(&mut counts, &mut rng);
        states.push(counts.clone());
    }
    Ok(Realization { model, dt: params.dt, states })
}

/// Cumulative-infected curve of one realization, without storing states.
/// Used by the fitting and inference hot loops.
pub fn simulate_cumulative(
    model: Model,
    params: &RateParams<f64>,
    init: &[u64],
    steps: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    let population = check_init(model, init)?;
    let kernel = StepKernel::new(model, params, population);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = init.to_vec();
    let mut curve = Vec::with_capacity(steps + 1);
    curve.push(model.cumulative_infected_count(&counts));
    for _ in 0..steps {
        if model.is_absorbing(&counts) {
            let last = *curve.last().expect("curve starts non-empty");
            curve.resize(steps + 1, last);
            break;
        }
        kernel.step(&mut counts, &mut rng);
        curve.push(model.cumulative_infected_count(&counts));
    }
    Ok(curve)
}

/// `config.realizations` independent realizations on streams
/// `seed, seed+1, …`. Runs in parallel; the result is identical to
/// sequential execution.
pub fn simulate_ensemble(
    model: Model,
    params: &RateParams<f64>,
    init: &[u64],
    config: &SimConfig,
) -> Result<Vec<Realization>> {
    check_init(model, init)?;
    (0..config.realizations as u64)
        .into_par_iter()
        .map(|i| simulate_seeded(model, params, init, config.steps, config.seed + i))
        .collect()
}

/// Pointwise arithmetic mean of an ensemble, as one fractional trajectory.
pub fn simulate_avg(
    model: Model,
    params: &RateParams<f64>,
    init: &[u64],
    config: &SimConfig,
) -> Result<Trajectory<f64>> {
    let ensemble = simulate_ensemble(model, params, init, config)?;
    Ok(average_ensemble(&ensemble))
}

fn average_ensemble(ensemble: &[Realization]) -> Trajectory<f64> {
    let h = ensemble.len() as f64;
    let steps = ensemble[0].states.len();
    let dim = ensemble[0].states[0].len();
    let mut states = vec![vec![0.0; dim]; steps];
    for real in ensemble {
        for (t, state) in real.states.iter().enumerate() {
            for (i, &c) in state.iter().enumerate() {
                states[t][i] += c as f64;
            }
        }
    }
    for state in &mut states {
        for c in state.iter_mut() {
            *c /= h;
        }
    }
    Trajectory { model: ensemble[0].model, dt: ensemble[0].dt, states }
}

/// Raw ensemble dump: `realization,t,<compartment labels...>`.
pub fn write_ensemble_csv<W: Write>(ensemble: &[Realization], mut w: W) -> std::io::Result<()> {
    if ensemble.is_empty() {
        return Ok(());
    }
    let model = ensemble[0].model;
    writeln!(w, "realization,t,{}", model.compartments().join(","))?;
    for (r, real) in ensemble.iter().enumerate() {
        for (step, state) in real.states.iter().enumerate() {
            let row: Vec<String> = state.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{},{},{}", r, step as f64 * real.dt, row.join(","))?;
        }
    }
    Ok(())
}
