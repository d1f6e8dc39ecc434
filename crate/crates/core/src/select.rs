//! AIC-based model selection over a uniform grid of transition rates.
//!
//! Every candidate model is simulated (chain binomial, averaged over h
//! realizations) at each grid point; the residuals against the observed
//! cumulative curve give the least-squares AIC = 2k + n·ln σ̂², and the
//! model with the global minimum wins.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Model, RateParams};
use crate::stochastic::{simulate_cumulative, SimConfig};
use crate::trace::EpidemicTrace;

/// Variance floor keeping the AIC finite on perfect fits.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Resamples the observed cumulative curve onto T equally spaced times
/// `t0 + j·dt`, j = 1..=T with dt = (t_end − t0)/T, carrying the last
/// observation forward (cumulative counts are right-continuous steps).
pub fn resample_curve(trace: &EpidemicTrace, t_points: usize) -> Result<Vec<f64>> {
    if t_points == 0 {
        return Err(Error::invalid("T must be >= 1"));
    }
    let dt = trace.duration() / t_points as f64;
    Ok((1..=t_points)
        .map(|j| trace.count_at(trace.t0 + j as f64 * dt) as f64)
        .collect())
}

/// Elementwise differences of two equal-length cumulative curves.
pub fn residuals(sim: &[f64], observed: &[f64]) -> Result<Vec<f64>> {
    if sim.len() != observed.len() {
        return Err(Error::DimensionMismatch { expected: observed.len(), got: sim.len() });
    }
    Ok(sim.iter().zip(observed).map(|(s, o)| s - o).collect())
}

/// Mean squared residual σ̂² = Σε²/n.
pub fn residual_variance(residuals: &[f64]) -> f64 {
    if residuals.is_empty() {
        return 0.0;
    }
    residuals.iter().map(|e| e * e).sum::<f64>() / residuals.len() as f64
}

/// Least-squares AIC: 2k + n·ln(max(σ̂², floor)).
pub fn aic(residuals: &[f64], k: usize) -> f64 {
    let n = residuals.len() as f64;
    2.0 * k as f64 + n * residual_variance(residuals).max(SIGMA_FLOOR).ln()
}

/// Grid sizes per parameter; each parameter takes the equidistant values
/// i/(count+1), i = 1..=count, inside the open interval (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub beta: usize,
    pub mu: usize,
    pub gamma1: usize,
    pub gamma2: usize,
    pub sigma: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { beta: 20, mu: 20, gamma1: 10, gamma2: 10, sigma: 10 }
    }
}

/// Equidistant values in the open unit interval.
pub fn grid_values(count: usize) -> Vec<f64> {
    (1..=count).map(|i| i as f64 / (count + 1) as f64).collect()
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if [self.beta, self.mu, self.gamma1, self.gamma2, self.sigma].contains(&0) {
            return Err(Error::invalid("grid sizes must be >= 1"));
        }
        Ok(())
    }

    /// Rate combinations for one model, varying only its free parameters.
    pub fn points(&self, model: Model, dt: f64) -> Vec<RateParams<f64>> {
        let one = vec![0.0];
        let betas = grid_values(self.beta);
        let (mus, gamma1s, gamma2s, sigmas) = match model {
            Model::Si => (one.clone(), one.clone(), one.clone(), one.clone()),
            Model::Sis | Model::Sir => {
                (grid_values(self.mu), one.clone(), one.clone(), one.clone())
            }
            Model::Seir => (grid_values(self.mu), one.clone(), one.clone(), grid_values(self.sigma)),
            Model::Siidr => (
                grid_values(self.mu),
                grid_values(self.gamma1),
                grid_values(self.gamma2),
                one.clone(),
            ),
        };
        let mut out =
            Vec::with_capacity(betas.len() * mus.len() * gamma1s.len() * gamma2s.len() * sigmas.len());
        for &beta in &betas {
            for &mu in &mus {
                for &gamma1 in &gamma1s {
                    for &gamma2 in &gamma2s {
                        for &sigma in &sigmas {
                            out.push(RateParams { beta, mu, gamma1, gamma2, sigma, dt });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Best fit of one model over the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: Model,
    pub params: RateParams<f64>,
    pub aic: f64,
    pub residual_variance: f64,
    /// Residual series length.
    pub n: usize,
    /// σ̂² fell below the floor: residuals were (numerically) zero.
    pub perfect_fit: bool,
}

/// Outcome of a model-selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// Best fit per candidate model, in candidate order.
    pub per_model: Vec<FitResult>,
    pub best_model: Model,
    pub total_evaluations: usize,
    pub t_points: usize,
    pub dt: f64,
    pub population: u64,
}

impl SelectionReport {
    pub fn best(&self) -> &FitResult {
        self.per_model
            .iter()
            .find(|f| f.model == self.best_model)
            .expect("best model is one of the candidates")
    }

    /// `trace,model,min_aic` rows.
    pub fn write_csv<W: std::io::Write>(&self, trace_name: &str, mut w: W) -> std::io::Result<()> {
        writeln!(w, "trace,model,min_aic")?;
        for fit in &self.per_model {
            writeln!(w, "{},{},{}", trace_name, fit.model, fit.aic)?;
        }
        Ok(())
    }
}

fn param_key(p: &RateParams<f64>) -> [f64; 5] {
    [p.beta, p.mu, p.gamma1, p.gamma2, p.sigma]
}

/// Initial state for fitting: one actively infected host, everyone else
/// susceptible.
pub fn seed_one_infected(model: Model, population: u64) -> Vec<u64> {
    let mut init = vec![0u64; model.compartment_count()];
    init[0] = population - 1;
    init[model.infectious_index()] = 1;
    init
}

/// Grid evaluation of one model: every grid point's AIC against the observed
/// resampled curve. The same seed is reused across points (common random
/// numbers), keeping comparisons deterministic.
pub fn evaluate_grid(
    model: Model,
    observed: &[f64],
    population: u64,
    grid: &GridSpec,
    sim: &SimConfig,
    dt: f64,
) -> Result<Vec<FitResult>> {
    let t_points = observed.len();
    let init = seed_one_infected(model, population);
    let k = model.free_param_count();
    grid.points(model, dt)
        .into_par_iter()
        .map(|params| {
            let mut acc = vec![0.0; t_points];
            for r in 0..sim.realizations as u64 {
                let curve = simulate_cumulative(model, &params, &init, t_points, sim.seed + r)?;
                for (a, c) in acc.iter_mut().zip(curve.iter().skip(1)) {
                    *a += *c as f64;
                }
            }
            for a in &mut acc {
                *a /= sim.realizations as f64;
            }
            let eps = residuals(&acc, observed)?;
            let variance = residual_variance(&eps);
            Ok(FitResult {
                model,
                params,
                aic: aic(&eps, k),
                residual_variance: variance,
                n: t_points,
                perfect_fit: variance < SIGMA_FLOOR,
            })
        })
        .collect()
}

/// Runs the grid selection over the candidate models.
///
/// The observed curve is resampled to `t_points` values; every model is
/// simulated for `t_points` steps of dt = duration/T from a single-infected
/// start, with the trace's contacted-host count as the population.
pub fn select_model(
    trace: &EpidemicTrace,
    models: &[Model],
    grid: &GridSpec,
    sim: &SimConfig,
    t_points: usize,
) -> Result<SelectionReport> {
    if models.is_empty() {
        return Err(Error::invalid("no candidate models"));
    }
    grid.validate()?;
    if trace.contacted_ips < 2 {
        return Err(Error::invalid("trace population must be at least 2"));
    }
    let population = trace.contacted_ips as u64;
    let observed = resample_curve(trace, t_points)?;
    let dt = trace.duration() / t_points as f64;

    let mut per_model = Vec::with_capacity(models.len());
    let mut total_evaluations = 0usize;
    for &model in models {
        let fits = evaluate_grid(model, &observed, population, grid, sim, dt)?;
        total_evaluations += fits.len();
        let best = fits
            .into_iter()
            .min_by(|a, b| {
                a.aic
                    .partial_cmp(&b.aic)
                    .expect("AIC is finite")
                    .then_with(|| param_key(&a.params).partial_cmp(&param_key(&b.params)).expect("finite"))
            })
            .expect("grid is non-empty");
        per_model.push(best);
    }

    // Global minimum; ties break toward fewer parameters, then model name.
    let best_model = per_model
        .iter()
        .min_by(|a, b| {
            a.aic
                .partial_cmp(&b.aic)
                .expect("AIC is finite")
                .then_with(|| a.model.free_param_count().cmp(&b.model.free_param_count()))
                .then_with(|| a.model.to_string().cmp(&b.model.to_string()))
        })
        .expect("at least one candidate")
        .model;

    Ok(SelectionReport { per_model, best_model, total_evaluations, t_points, dt, population })
}
