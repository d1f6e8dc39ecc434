//! Likelihood-free posterior inference of the SIIDR transition rates.
//!
//! Two samplers over the uniform prior on [0,1]⁴: plain rejection, and a
//! sequential Monte Carlo scheme whose perturbation kernel is a multivariate
//! normal with covariance twice the empirical covariance of each particle's
//! M nearest neighbors. Tolerances adapt: the first comes from a pilot
//! quantile of prior-draw distances, each later one is the median accepted
//! distance of the previous generation.

use nalgebra::{Cholesky, Matrix4, Vector4};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Model, RateParams};
use crate::quantile::quantile;
use crate::select::{resample_curve, seed_one_infected};
use crate::stochastic::simulate_cumulative;
use crate::trace::EpidemicTrace;

/// Inferred parameter order: (β, μ, γ₁, γ₂).
pub const PARAM_NAMES: [&str; 4] = ["beta", "mu", "gamma1", "gamma2"];

pub type Theta = [f64; 4];

/// One accepted parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub theta: Theta,
    pub weight: f64,
    /// Best accepted distance among this particle's simulations.
    pub distance: f64,
}

/// One generation of accepted particles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticlePopulation {
    pub generation: usize,
    pub particles: Vec<Particle>,
    /// Tolerance used to accept this generation.
    pub epsilon: f64,
    pub acceptance_rate: f64,
    pub total_draws: usize,
}

impl ParticlePopulation {
    pub fn weights_sum(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }
}

/// The observed epidemic prepared for fitting: the cumulative curve
/// resampled onto the T-point grid, plus the simulation geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedData {
    pub curve: Vec<f64>,
    pub population: u64,
    pub dt: f64,
}

impl ObservedData {
    /// Resamples `trace` to `t_points` values (the model-selection rule).
    pub fn from_trace(trace: &EpidemicTrace, t_points: usize) -> Result<Self> {
        if trace.contacted_ips < 2 {
            return Err(Error::invalid("trace population must be at least 2"));
        }
        if !(trace.duration() > 0.0) {
            return Err(Error::invalid("trace duration must be positive"));
        }
        Ok(Self {
            curve: resample_curve(trace, t_points)?,
            population: trace.contacted_ips as u64,
            dt: trace.duration() / t_points as f64,
        })
    }

    fn simulate_distance(&self, theta: &Theta, seed: u64) -> Result<f64> {
        let params = RateParams::siidr(theta[0], theta[1], theta[2], theta[3], self.dt)?;
        let init = seed_one_infected(Model::Siidr, self.population);
        let sim = simulate_cumulative(Model::Siidr, &params, &init, self.curve.len(), seed)?;
        let simulated: Vec<f64> = sim.iter().skip(1).map(|&c| c as f64).collect();
        distance(&self.curve, &simulated)
    }
}

/// Sum of squared differences between two cumulative curves on a common
/// grid.
pub fn distance(observed: &[f64], simulated: &[f64]) -> Result<f64> {
    if observed.len() != simulated.len() {
        return Err(Error::DimensionMismatch { expected: observed.len(), got: simulated.len() });
    }
    Ok(observed.iter().zip(simulated).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// SplitMix64-style mixing for derived RNG streams.
fn mix_seed(base: u64, parts: &[u64]) -> u64 {
    let mut z = base;
    for &p in parts {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(p);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

fn sample_prior(rng: &mut ChaCha8Rng) -> Theta {
    [rng.random(), rng.random(), rng.random(), rng.random()]
}

fn in_unit_box(theta: &Theta) -> bool {
    theta.iter().all(|v| (0.0..=1.0).contains(v))
}

/// Plain rejection (uniform prior, one simulation per draw): keeps drawing
/// until `n_particles` parameter vectors land within `epsilon`, or the draw
/// budget runs out.
pub fn abc_rejection(
    observed: &ObservedData,
    epsilon: f64,
    n_particles: usize,
    draw_budget: usize,
    seed: u64,
) -> Result<ParticlePopulation> {
    if n_particles == 0 {
        return Err(Error::invalid("need at least one particle"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be > 0"));
    }
    let mut particles = Vec::with_capacity(n_particles);
    let mut draws_used = 0usize;
    let chunk = (4 * n_particles).max(64);
    let mut next = 0usize;
    while particles.len() < n_particles && next < draw_budget {
        let hi = (next + chunk).min(draw_budget);
        let results: Vec<(Theta, f64)> = (next..hi)
            .into_par_iter()
            .map(|d| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[0, d as u64]));
                let theta = sample_prior(&mut rng);
                let dist = observed.simulate_distance(&theta, mix_seed(seed, &[1, d as u64]))?;
                Ok((theta, dist))
            })
            .collect::<Result<_>>()?;
        for (theta, dist) in results {
            draws_used += 1;
            if dist <= epsilon {
                particles.push(Particle { theta, weight: 1.0, distance: dist });
                if particles.len() == n_particles {
                    break;
                }
            }
        }
        next = hi;
    }
    if particles.len() < n_particles {
        return Err(Error::BudgetExhausted(format!(
            "rejection accepted {}/{} particles within {} draws at epsilon {epsilon}",
            particles.len(),
            n_particles,
            draw_budget
        )));
    }
    let w = 1.0 / n_particles as f64;
    for p in &mut particles {
        p.weight = w;
    }
    Ok(ParticlePopulation {
        generation: 0,
        particles,
        epsilon,
        acceptance_rate: n_particles as f64 / draws_used as f64,
        total_draws: draws_used,
    })
}

/// ABC-SMC-MNN settings. Defaults are sized for desk-scale traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmcConfig {
    pub n_particles: usize,
    pub generations: usize,
    /// Neighbors per particle for the kernel covariance.
    pub neighbors: usize,
    /// Simulations per proposed particle.
    pub n_sims: usize,
    /// Prior draws used to set the first tolerance.
    pub pilot_draws: usize,
    /// Quantile of pilot distances giving ε₁.
    pub pilot_quantile: f64,
    /// Quantile of accepted distances giving the next tolerance.
    pub schedule_quantile: f64,
    /// When a generation's acceptance rate falls below this, the next
    /// tolerance uses [`SmcConfig::relaxed_quantile`] instead: the schedule
    /// is approaching the stochastic noise floor and further aggressive
    /// tightening only burns the budget.
    pub relax_below_acceptance: f64,
    /// Gentler schedule quantile used near the noise floor.
    pub relaxed_quantile: f64,
    /// Proposal budget per generation, as a multiple of `n_particles`.
    pub draw_budget_factor: usize,
    pub seed: u64,
}

impl Default for SmcConfig {
    fn default() -> Self {
        Self {
            n_particles: 500,
            generations: 8,
            neighbors: 50,
            n_sims: 10,
            pilot_draws: 1000,
            pilot_quantile: 0.2,
            schedule_quantile: 0.3,
            relax_below_acceptance: 0.015,
            relaxed_quantile: 0.75,
            draw_budget_factor: 200,
            seed: 0,
        }
    }
}

impl SmcConfig {
    fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::invalid("need at least 2 particles"));
        }
        if self.generations == 0 {
            return Err(Error::invalid("need at least 1 generation"));
        }
        if self.neighbors < 2 || self.neighbors > self.n_particles {
            return Err(Error::invalid("neighbors must lie in [2, n_particles]"));
        }
        if self.n_sims == 0 || self.pilot_draws == 0 || self.draw_budget_factor == 0 {
            return Err(Error::invalid("n_sims, pilot_draws and budget factor must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.pilot_quantile)
            || !(0.0..1.0).contains(&self.schedule_quantile)
            || !(0.0..1.0).contains(&self.relaxed_quantile)
        {
            return Err(Error::invalid("quantiles must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Perturbation kernel of one source particle: N(θ, 2·Cov(MNN(θ))).
struct Kernel {
    chol: Cholesky<f64, nalgebra::Const<4>>,
    log_norm: f64,
}

impl Kernel {
    fn build(cov: Matrix4<f64>) -> Kernel {
        // Ridge escalation keeps degenerate neighbor sets usable.
        let mut ridge = 0.0;
        loop {
            let m = cov + Matrix4::identity() * ridge;
            if let Some(chol) = Cholesky::new(m) {
                let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum();
                let log_norm = -(4.0 / 2.0) * (2.0 * std::f64::consts::PI).ln() - log_det;
                return Kernel { chol, log_norm };
            }
            ridge = if ridge == 0.0 { 1e-10 } else { ridge * 100.0 };
            assert!(ridge < 1.0, "covariance cannot be regularized");
        }
    }

    fn sample(&self, center: &Theta, rng: &mut ChaCha8Rng) -> Theta {
        let z = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let step = self.chol.l() * z;
        [
            center[0] + step[0],
            center[1] + step[1],
            center[2] + step[2],
            center[3] + step[3],
        ]
    }

    fn density(&self, x: &Theta, center: &Theta) -> f64 {
        let diff = Vector4::new(
            x[0] - center[0],
            x[1] - center[1],
            x[2] - center[2],
            x[3] - center[3],
        );
        let solved = self.chol.l().solve_lower_triangular(&diff).expect("L is nonsingular");
        (self.log_norm - 0.5 * solved.norm_squared()).exp()
    }
}

/// Per-particle kernels for one generation: covariance from the M nearest
/// neighbors (Euclidean in parameter space), doubled.
fn build_kernels(particles: &[Particle], neighbors: usize) -> Vec<Kernel> {
    let n = particles.len();
    let m = neighbors.min(n);
    (0..n)
        .map(|i| {
            let mut dists: Vec<(f64, usize)> = (0..n)
                .map(|j| {
                    let a = &particles[i].theta;
                    let b = &particles[j].theta;
                    let d2: f64 = (0..4).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum();
                    (d2, j)
                })
                .collect();
            dists.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite").then(a.1.cmp(&b.1)));
            let chosen: Vec<&Theta> = dists[..m].iter().map(|(_, j)| &particles[*j].theta).collect();
            let mut mean = [0.0f64; 4];
            for t in &chosen {
                for k in 0..4 {
                    mean[k] += t[k];
                }
            }
            for v in &mut mean {
                *v /= m as f64;
            }
            let mut cov = Matrix4::zeros();
            for t in &chosen {
                for a in 0..4 {
                    for b in 0..4 {
                        cov[(a, b)] += (t[a] - mean[a]) * (t[b] - mean[b]);
                    }
                }
            }
            cov /= m as f64;
            Kernel::build(cov * 2.0)
        })
        .collect()
}

fn sample_index_by_weight(cumulative: &[f64], u: f64) -> usize {
    let target = u * cumulative.last().expect("non-empty");
    cumulative.partition_point(|c| *c < target).min(cumulative.len() - 1)
}

/// Full ABC-SMC-MNN run; returns every generation, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmcResult {
    pub populations: Vec<ParticlePopulation>,
}

impl SmcResult {
    pub fn last(&self) -> &ParticlePopulation {
        self.populations.last().expect("at least one generation")
    }

    /// `generation,beta,mu,gamma1,gamma2,weight,distance` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "generation,beta,mu,gamma1,gamma2,weight,distance")?;
        for pop in &self.populations {
            for p in &pop.particles {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    pop.generation,
                    p.theta[0],
                    p.theta[1],
                    p.theta[2],
                    p.theta[3],
                    p.weight,
                    p.distance
                )?;
            }
        }
        Ok(())
    }
}

pub fn abc_smc_mnn(observed: &ObservedData, config: &SmcConfig) -> Result<SmcResult> {
    config.validate()?;

    // Pilot distances fix the first tolerance.
    let pilot: Vec<f64> = (0..config.pilot_draws as u64)
        .into_par_iter()
        .map(|d| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, &[0xabc0, d]));
            let theta = sample_prior(&mut rng);
            observed.simulate_distance(&theta, mix_seed(config.seed, &[0xabc1, d]))
        })
        .collect::<Result<_>>()?;
    let mut epsilon = quantile(&pilot, config.pilot_quantile).max(f64::MIN_POSITIVE);

    let budget = config.draw_budget_factor * config.n_particles;
    let mut populations: Vec<ParticlePopulation> = Vec::with_capacity(config.generations);

    for g in 0..config.generations {
        let previous = populations.last();
        let kernels = previous.map(|pop| build_kernels(&pop.particles, config.neighbors));
        let cumulative: Option<Vec<f64>> = previous.map(|pop| {
            let mut acc = 0.0;
            pop.particles
                .iter()
                .map(|p| {
                    acc += p.weight;
                    acc
                })
                .collect()
        });

        let propose = |d: usize| -> Result<Option<Particle>> {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, &[g as u64, d as u64]));
            let theta = match (previous, &kernels, &cumulative) {
                (None, _, _) => sample_prior(&mut rng),
                (Some(pop), Some(kernels), Some(cumulative)) => {
                    // Sample a source particle, perturb, and resample the
                    // perturbation until it stays in the prior box.
                    let mut proposal = None;
                    for _ in 0..10_000 {
                        let src = sample_index_by_weight(cumulative, rng.random());
                        let candidate =
                            kernels[src].sample(&pop.particles[src].theta, &mut rng);
                        if in_unit_box(&candidate) {
                            proposal = Some(candidate);
                            break;
                        }
                    }
                    match proposal {
                        Some(t) => t,
                        None => return Ok(None),
                    }
                }
                _ => unreachable!("kernels exist whenever a previous generation does"),
            };

            // Estimated acceptance probability over n_sims simulations.
            let mut hits = 0usize;
            let mut best = f64::INFINITY;
            for l in 0..config.n_sims {
                let sim_seed = mix_seed(config.seed, &[g as u64, d as u64, 1 + l as u64]);
                let dist = observed.simulate_distance(&theta, sim_seed)?;
                if dist < epsilon {
                    hits += 1;
                    best = best.min(dist);
                }
            }
            if hits == 0 {
                return Ok(None);
            }
            let p_hat = hits as f64 / config.n_sims as f64;
            let weight = match (previous, &kernels) {
                (None, _) => p_hat, // uniform prior density is 1 on the box
                (Some(pop), Some(kernels)) => {
                    let denom: f64 = pop
                        .particles
                        .iter()
                        .zip(kernels.iter())
                        .map(|(src, kernel)| src.weight * kernel.density(&theta, &src.theta))
                        .sum();
                    if denom <= 0.0 {
                        return Ok(None);
                    }
                    p_hat / denom
                }
                _ => unreachable!(),
            };
            Ok(Some(Particle { theta, weight, distance: best }))
        };

        // Deterministic parallel scan: proposals are indexed, accepted in
        // index order, and the first n_particles win.
        let mut particles: Vec<Particle> = Vec::with_capacity(config.n_particles);
        let mut draws_used = 0usize;
        let chunk = (config.n_particles * 2).max(128);
        let mut next = 0usize;
        while particles.len() < config.n_particles && next < budget {
            let hi = (next + chunk).min(budget);
            let results: Vec<Option<Particle>> =
                (next..hi).into_par_iter().map(propose).collect::<Result<_>>()?;
            for r in results {
                draws_used += 1;
                if let Some(p) = r {
                    particles.push(p);
                    if particles.len() == config.n_particles {
                        break;
                    }
                }
            }
            next = hi;
        }
        if particles.len() < config.n_particles {
            return Err(Error::BudgetExhausted(format!(
                "generation {g} accepted {}/{} particles within {budget} draws at epsilon {epsilon}",
                particles.len(),
                config.n_particles
            )));
        }

        let total_weight: f64 = particles.iter().map(|p| p.weight).sum();
        for p in &mut particles {
            p.weight /= total_weight;
        }
        let accepted_distances: Vec<f64> = particles.iter().map(|p| p.distance).collect();
        let acceptance_rate = config.n_particles as f64 / draws_used as f64;
        populations.push(ParticlePopulation {
            generation: g,
            particles,
            epsilon,
            acceptance_rate,
            total_draws: draws_used,
        });

        // Next tolerance: accepted distances all lie below ε, so the
        // schedule decreases strictly. Once acceptance gets expensive the
        // tolerance is near the simulator's own noise floor; switch to the
        // gentler quantile instead of throwing draws at it.
        let q = if acceptance_rate < config.relax_below_acceptance {
            config.relaxed_quantile
        } else {
            config.schedule_quantile
        };
        let next_eps = quantile(&accepted_distances, q);
        if next_eps <= 0.0 {
            break; // perfect fits: nothing left to tighten
        }
        epsilon = next_eps;
    }

    Ok(SmcResult { populations })
}

/// Weighted posterior moments and the pairwise correlation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub means: [f64; 4],
    pub stds: [f64; 4],
    pub correlations: [[f64; 4]; 4],
    /// Parameter pairs with |ρ| > 0.8: a practical-identifiability warning.
    pub high_correlation_pairs: Vec<(String, String, f64)>,
}

pub fn posterior_summary(population: &ParticlePopulation) -> PosteriorSummary {
    let particles = &population.particles;
    let mut means = [0.0f64; 4];
    for p in particles {
        for k in 0..4 {
            means[k] += p.weight * p.theta[k];
        }
    }
    let mut cov = [[0.0f64; 4]; 4];
    for p in particles {
        for a in 0..4 {
            for b in 0..4 {
                cov[a][b] += p.weight * (p.theta[a] - means[a]) * (p.theta[b] - means[b]);
            }
        }
    }
    let stds = [cov[0][0].sqrt(), cov[1][1].sqrt(), cov[2][2].sqrt(), cov[3][3].sqrt()];
    let mut correlations = [[0.0f64; 4]; 4];
    let mut high = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            correlations[a][b] = if stds[a] > 0.0 && stds[b] > 0.0 {
                cov[a][b] / (stds[a] * stds[b])
            } else if a == b {
                1.0
            } else {
                0.0
            };
            if a < b && correlations[a][b].abs() > 0.8 {
                high.push((
                    PARAM_NAMES[a].to_string(),
                    PARAM_NAMES[b].to_string(),
                    correlations[a][b],
                ));
            }
        }
    }
    PosteriorSummary { means, stds, correlations, high_correlation_pairs: high }
}

/// Weighted quantile of one parameter across a population.
pub fn weighted_quantile(population: &ParticlePopulation, param: usize, q: f64) -> f64 {
    assert!(param < 4 && (0.0..=1.0).contains(&q));
    let mut pairs: Vec<(f64, f64)> =
        population.particles.iter().map(|p| (p.theta[param], p.weight)).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    let total: f64 = pairs.iter().map(|(_, w)| w).sum();
    let target = q * total;
    let mut acc = 0.0;
    for (value, weight) in &pairs {
        acc += weight;
        if acc >= target {
            return *value;
        }
    }
    pairs.last().expect("non-empty").0
}

/// R₀ from the posterior means: β̄/μ̄.
pub fn r0_from_posterior(summary: &PosteriorSummary) -> Result<f64> {
    if summary.means[1] <= 0.0 {
        return Err(Error::invalid("posterior mean of mu must be positive"));
    }
    Ok(summary.means[0] / summary.means[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::EpidemicTrace;

    /// Simulated SIIDR trace with at least 3 infections; degenerate seeds
    /// (epidemics that die in place) advance to the next stream.
    fn synthetic_observed(theta: Theta, n: u64, dt: f64, steps: usize, seed: u64) -> ObservedData {
        let params = RateParams::siidr(theta[0], theta[1], theta[2], theta[3], dt).unwrap();
        let init = seed_one_infected(Model::Siidr, n);
        for attempt in 0..100 {
            let curve =
                simulate_cumulative(Model::Siidr, &params, &init, steps, seed + 1000 * attempt)
                    .unwrap();
            if *curve.last().unwrap() < 3 {
                continue;
            }
            let trace = EpidemicTrace::from_simulated_curve(&curve, dt, n as usize).unwrap();
            let trace = crate::trace::truncate_plateau(&trace);
            let t_points = ((trace.duration() / dt).round() as usize).max(10);
            return ObservedData::from_trace(&trace, t_points).unwrap();
        }
        panic!("no epidemic took off in 100 attempts");
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let a = [0.0, 1.0, 2.0, 3.0, 4.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(distance(&a, &b).unwrap(), 5.0);
        assert!(distance(&a, &b[..4]).is_err());
    }

    #[test]
    fn rejection_with_infinite_epsilon_takes_first_draws() {
        let observed = synthetic_observed([0.3, 0.2, 0.5, 0.2], 30, 0.5, 100, 1);
        let pop = abc_rejection(&observed, f64::INFINITY, 25, 1000, 7).unwrap();
        assert_eq!(pop.particles.len(), 25);
        assert_eq!(pop.total_draws, 25);
        assert!((pop.acceptance_rate - 1.0).abs() < 1e-12);
        for p in &pop.particles {
            assert!((p.weight - 1.0 / 25.0).abs() < 1e-15);
            assert!(in_unit_box(&p.theta));
        }
    }

    #[test]
    fn rejection_rejects_zero_particles_and_exhausts_budget() {
        let observed = synthetic_observed([0.3, 0.2, 0.5, 0.2], 30, 0.5, 100, 1);
        assert!(abc_rejection(&observed, 1.0, 0, 100, 0).is_err());
        // Impossibly tight tolerance burns the budget.
        let err = abc_rejection(&observed, 1e-300, 10, 64, 0);
        assert!(matches!(err, Err(Error::BudgetExhausted(_))));
    }

    #[test]
    fn rejection_posterior_concentrates_toward_truth() {
        let truth = [0.65, 0.1, 0.3, 0.3];
        let observed = synthetic_observed(truth, 50, 0.4, 250, 3);
        // Pilot tolerance at the 10th percentile of prior distances.
        let pilot: Vec<f64> = (0..300)
            .map(|d| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(5, &[90, d]));
                let theta = sample_prior(&mut rng);
                observed.simulate_distance(&theta, mix_seed(5, &[91, d])).unwrap()
            })
            .collect();
        let eps = quantile(&pilot, 0.1);
        let pop = abc_rejection(&observed, eps, 60, 60_000, 11).unwrap();
        let mean_beta: f64 =
            pop.particles.iter().map(|p| p.weight * p.theta[0]).sum();
        // Accepted β sits nearer the truth than the prior mean 0.5 does.
        assert!(
            (mean_beta - truth[0]).abs() < (0.5 - truth[0]).abs(),
            "posterior mean {mean_beta}"
        );
    }

    fn quick_config(seed: u64) -> SmcConfig {
        SmcConfig {
            n_particles: 60,
            generations: 3,
            neighbors: 15,
            n_sims: 3,
            pilot_draws: 150,
            seed,
            ..SmcConfig::default()
        }
    }

    #[test]
    fn smc_invariants_hold() {
        let observed = synthetic_observed([0.4, 0.15, 0.6, 0.1], 40, 0.4, 300, 2);
        let result = abc_smc_mnn(&observed, &quick_config(19)).unwrap();
        assert_eq!(result.populations.len(), 3);
        // Strictly decreasing tolerance schedule.
        for pair in result.populations.windows(2) {
            assert!(pair[1].epsilon < pair[0].epsilon);
        }
        for pop in &result.populations {
            assert!((pop.weights_sum() - 1.0).abs() < 1e-12);
            assert_eq!(pop.particles.len(), 60);
            for p in &pop.particles {
                assert!(in_unit_box(&p.theta));
                assert!(p.distance < pop.epsilon);
            }
        }
        // Posterior spread contracts from the prior generation.
        let first = posterior_summary(&result.populations[0]);
        let last = posterior_summary(result.last());
        assert!(last.stds[0] <= first.stds[0] * 1.25);
    }

    #[test]
    fn smc_single_generation_is_weighted_rejection() {
        let observed = synthetic_observed([0.4, 0.15, 0.6, 0.1], 40, 0.4, 300, 2);
        let config = SmcConfig { generations: 1, ..quick_config(23) };
        let result = abc_smc_mnn(&observed, &config).unwrap();
        assert_eq!(result.populations.len(), 1);
        let pop = &result.populations[0];
        // Weights are normalized acceptance estimates; no perturbation ran.
        assert!((pop.weights_sum() - 1.0).abs() < 1e-12);
        assert!(pop.particles.iter().all(|p| p.weight > 0.0));
    }

    #[test]
    fn smc_is_deterministic() {
        let observed = synthetic_observed([0.4, 0.15, 0.6, 0.1], 35, 0.4, 200, 4);
        let a = abc_smc_mnn(&observed, &quick_config(5)).unwrap();
        let b = abc_smc_mnn(&observed, &quick_config(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kernel_handles_degenerate_populations() {
        let particles: Vec<Particle> = (0..10)
            .map(|_| Particle { theta: [0.5, 0.5, 0.5, 0.5], weight: 0.1, distance: 1.0 })
            .collect();
        let kernels = build_kernels(&particles, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sample = kernels[0].sample(&particles[0].theta, &mut rng);
        assert!(sample.iter().all(|v| v.is_finite()));
        assert!(kernels[0].density(&sample, &particles[0].theta).is_finite());
    }

    #[test]
    fn summary_moment_examples() {
        let single = ParticlePopulation {
            generation: 0,
            particles: vec![Particle { theta: [0.2, 0.3, 0.4, 0.5], weight: 1.0, distance: 0.0 }],
            epsilon: 1.0,
            acceptance_rate: 1.0,
            total_draws: 1,
        };
        let s = posterior_summary(&single);
        assert_eq!(s.means, [0.2, 0.3, 0.4, 0.5]);
        assert_eq!(s.stds, [0.0; 4]);

        let two = ParticlePopulation {
            generation: 0,
            particles: vec![
                Particle { theta: [0.0; 4], weight: 0.5, distance: 0.0 },
                Particle { theta: [1.0; 4], weight: 0.5, distance: 0.0 },
            ],
            epsilon: 1.0,
            acceptance_rate: 1.0,
            total_draws: 2,
        };
        let s = posterior_summary(&two);
        assert!(s.means.iter().all(|m| (m - 0.5).abs() < 1e-15));
        assert!(s.stds.iter().all(|d| (d - 0.5).abs() < 1e-15));
        // Perfectly co-moving parameters are flagged.
        assert_eq!(s.high_correlation_pairs.len(), 6);
        assert!((s.correlations[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_quantiles_bracket_the_mass() {
        let pop = ParticlePopulation {
            generation: 0,
            particles: (0..100)
                .map(|i| Particle {
                    theta: [i as f64 / 99.0, 0.0, 0.0, 0.0],
                    weight: 0.01,
                    distance: 0.0,
                })
                .collect(),
            epsilon: 1.0,
            acceptance_rate: 1.0,
            total_draws: 100,
        };
        let lo = weighted_quantile(&pop, 0, 0.025);
        let hi = weighted_quantile(&pop, 0, 0.975);
        assert!(lo < 0.06 && hi > 0.94, "[{lo}, {hi}]");
        assert!((weighted_quantile(&pop, 0, 0.5) - 0.5).abs() < 0.02);
    }

    #[test]
    fn r0_examples() {
        let mut s = PosteriorSummary {
            means: [0.16, 0.11, 0.79, 0.06],
            stds: [0.0; 4],
            correlations: [[0.0; 4]; 4],
            high_correlation_pairs: vec![],
        };
        assert!((r0_from_posterior(&s).unwrap() - 1.4545).abs() < 1e-3);
        s.means = [0.3, 0.3, 0.1, 0.1];
        assert!((r0_from_posterior(&s).unwrap() - 1.0).abs() < 1e-15);
        s.means[1] = 0.0;
        assert!(r0_from_posterior(&s).is_err());
    }

    #[test]
    fn populations_csv_shape() {
        let observed = synthetic_observed([0.4, 0.15, 0.6, 0.1], 30, 0.5, 150, 6);
        let config = SmcConfig {
            n_particles: 10,
            generations: 2,
            neighbors: 4,
            n_sims: 2,
            pilot_draws: 50,
            seed: 9,
            ..SmcConfig::default()
        };
        let result = abc_smc_mnn(&observed, &config).unwrap();
        let mut buf = Vec::new();
        result.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("generation,beta,mu,gamma1,gamma2,weight,distance\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 10);
    }
}
