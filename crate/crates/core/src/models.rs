//! Compartmental models under homogeneous mixing: ODE right-hand sides, a
//! fixed-step RK4 integrator, disease-free equilibria, the next-generation
//! matrix, the basic reproduction number, and Lyapunov diagnostics.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::float::Float;

/// Relative tolerance for population conservation checks.
pub const CONSERVATION_RTOL: f64 = 1e-9;

/// Compartment counts this far below zero are treated as floating-point
/// drift and clamped; anything larger is an error.
pub const NEGATIVE_CLAMP: f64 = 1e-9;

/// The compartmental models supported by the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Si,
    Sis,
    Sir,
    Seir,
    Siidr,
}

impl Model {
    pub const ALL: [Model; 5] = [Model::Si, Model::Sis, Model::Sir, Model::Seir, Model::Siidr];

    /// Ordered compartment labels, matching the model's transition diagram.
    pub fn compartments(self) -> &'static [&'static str] {
        match self {
            Model::Si | Model::Sis => &["S", "I"],
            Model::Sir => &["S", "I", "R"],
            Model::Seir => &["S", "E", "I", "R"],
            Model::Siidr => &["S", "I", "I_D", "R"],
        }
    }

    pub fn compartment_count(self) -> usize {
        self.compartments().len()
    }

    /// Number of free transition rates: SI has β; SIS/SIR add μ; SEIR adds
    /// the incubation rate; SIIDR has β, μ and both dormancy rates.
    pub fn free_param_count(self) -> usize {
        match self {
            Model::Si => 1,
            Model::Sis | Model::Sir => 2,
            Model::Seir => 3,
            Model::Siidr => 4,
        }
    }

    /// Index of the actively infectious compartment (drives transmission).
    pub fn infectious_index(self) -> usize {
        match self {
            Model::Si | Model::Sis | Model::Sir | Model::Siidr => 1,
            Model::Seir => 2,
        }
    }

    /// Compartments counted as "has been actively infected": I + I_D + R for
    /// SIIDR, I + R for SIR/SEIR, current I for SI/SIS (no one-way outflow).
    pub fn cumulative_indices(self) -> &'static [usize] {
        match self {
            Model::Si | Model::Sis => &[1],
            Model::Sir => &[1, 2],
            Model::Seir => &[2, 3],
            Model::Siidr => &[1, 2, 3],
        }
    }

    /// Cumulative number of hosts that are or have been actively infected.
    pub fn cumulative_infected<F: Float>(self, counts: &[F]) -> F {
        self.cumulative_indices().iter().map(|&i| counts[i]).sum()
    }

    /// Integer-count version of [`Model::cumulative_infected`].
    pub fn cumulative_infected_count(self, counts: &[u64]) -> u64 {
        self.cumulative_indices().iter().map(|&i| counts[i]).sum()
    }

    /// True when no further transition can change the state (integer counts).
    pub fn is_absorbing(self, counts: &[u64]) -> bool {
        match self {
            Model::Si => counts[0] == 0 || counts[1] == 0,
            Model::Sis | Model::Sir => counts[1] == 0,
            Model::Seir => counts[1] == 0 && counts[2] == 0,
            Model::Siidr => counts[1] == 0 && counts[2] == 0,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Model::Si => "SI",
            Model::Sis => "SIS",
            Model::Sir => "SIR",
            Model::Seir => "SEIR",
            Model::Siidr => "SIIDR",
        };
        f.write_str(name)
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "si" => Ok(Model::Si),
            "sis" => Ok(Model::Sis),
            "sir" => Ok(Model::Sir),
            "seir" => Ok(Model::Seir),
            "siidr" => Ok(Model::Siidr),
            other => Err(Error::invalid(format!("unknown model '{other}'"))),
        }
    }
}

/// Transition rates plus the integration step.
///
/// Rates a model does not use are ignored, never read. The SEIR incubation
/// rate is named `sigma` to keep it distinct from the SIIDR dormancy rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams<F> {
    /// Infection rate per unit time.
    pub beta: F,
    /// Recovery rate.
    pub mu: F,
    /// Infected → dormant rate.
    pub gamma1: F,
    /// Dormant → infected rate.
    pub gamma2: F,
    /// Exposed → infected rate (SEIR only).
    pub sigma: F,
    /// Integration step in trace time units.
    pub dt: F,
}

impl<F: Float> RateParams<F> {
    pub fn new(beta: F, mu: F, gamma1: F, gamma2: F, sigma: F, dt: F) -> Result<Self> {
        let p = Self { beta, mu, gamma1, gamma2, sigma, dt };
        p.validate()?;
        Ok(p)
    }

    /// SIIDR rates (σ unused).
    pub fn siidr(beta: F, mu: F, gamma1: F, gamma2: F, dt: F) -> Result<Self> {
        Self::new(beta, mu, gamma1, gamma2, F::zero(), dt)
    }

    /// SI rate (only β used).
    pub fn si(beta: F, dt: F) -> Result<Self> {
        Self::new(beta, F::zero(), F::zero(), F::zero(), F::zero(), dt)
    }

    /// SIS/SIR rates (β, μ).
    pub fn sir(beta: F, mu: F, dt: F) -> Result<Self> {
        Self::new(beta, mu, F::zero(), F::zero(), F::zero(), dt)
    }

    /// SEIR rates (β, μ, σ).
    pub fn seir(beta: F, mu: F, sigma: F, dt: F) -> Result<Self> {
        Self::new(beta, mu, F::zero(), F::zero(), sigma, dt)
    }

    fn validate(&self) -> Result<()> {
        let rates = [self.beta, self.mu, self.gamma1, self.gamma2, self.sigma];
        if rates.iter().any(|r| !(*r >= F::zero()) || !r.is_finite()) {
            return Err(Error::invalid("transition rates must be finite and >= 0"));
        }
        if !(self.dt > F::zero()) || !self.dt.is_finite() {
            return Err(Error::invalid("dt must be finite and > 0"));
        }
        Ok(())
    }
}

/// Per-compartment counts with a fixed total population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompartmentState<F> {
    counts: Vec<F>,
    population: F,
}

impl<F: Float> CompartmentState<F> {
    /// Builds a state whose population is the exact sum of `counts`.
    pub fn new(counts: Vec<F>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::invalid("state needs at least one compartment"));
        }
        if counts.iter().any(|c| !(*c >= F::zero()) || !c.is_finite()) {
            return Err(Error::invalid("compartment counts must be finite and >= 0"));
        }
        let population = counts.iter().copied().sum();
        if !(population > F::zero()) {
            return Err(Error::invalid("population must be positive"));
        }
        Ok(Self { counts, population })
    }

    pub fn counts(&self) -> &[F] {
        &self.counts
    }

    pub fn population(&self) -> F {
        self.population
    }

    /// |Σcounts − N| ≤ 1e-9·N.
    pub fn is_conserved(&self) -> bool {
        let sum: F = self.counts.iter().copied().sum();
        (sum - self.population).abs() <= F::of(CONSERVATION_RTOL) * self.population
    }

    pub fn check_dimension(&self, model: Model) -> Result<()> {
        let expected = model.compartment_count();
        if self.counts.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: self.counts.len() });
        }
        Ok(())
    }
}

/// dX/dt for one model at one state. Components sum to zero: the population
/// is closed.
pub fn rhs<F: Float>(
    model: Model,
    state: &CompartmentState<F>,
    params: &RateParams<F>,
) -> Result<Vec<F>> {
    state.check_dimension(model)?;
    let n = state.population();
    if !(n > F::zero()) {
        return Err(Error::invalid("population must be positive"));
    }
    let x = state.counts();
    let force = |s: F, i: F| params.beta * s * i / n;
    Ok(match model {
        Model::Si => {
            let f = force(x[0], x[1]);
            vec![-f, f]
        }
        Model::Sis => {
            let f = force(x[0], x[1]);
            vec![-f + params.mu * x[1], f - params.mu * x[1]]
        }
        Model::Sir => {
            let f = force(x[0], x[1]);
            vec![-f, f - params.mu * x[1], params.mu * x[1]]
        }
        Model::Seir => {
            let f = force(x[0], x[2]);
            vec![
                -f,
                f - params.sigma * x[1],
                params.sigma * x[1] - params.mu * x[2],
                params.mu * x[2],
            ]
        }
        Model::Siidr => {
            let f = force(x[0], x[1]);
            vec![
                -f,
                f - params.mu * x[1] - params.gamma1 * x[1] + params.gamma2 * x[2],
                params.gamma1 * x[1] - params.gamma2 * x[2],
                params.mu * x[1],
            ]
        }
    })
}

/// Time series of per-compartment counts, one row per integration step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<F> {
    pub model: Model,
    pub dt: F,
    /// `steps + 1` states, including the initial one.
    pub states: Vec<Vec<F>>,
}

impl<F: Float> Trajectory<F> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, step: usize) -> F {
        F::from_usize(step).expect("step fits in float") * self.dt
    }

    /// Cumulative-infected series (model-appropriate, see
    /// [`Model::cumulative_infected`]).
    pub fn cumulative_infected(&self) -> Vec<F> {
        self.states.iter().map(|s| self.model.cumulative_infected(s)).collect()
    }

    /// Series of one compartment by label.
    pub fn compartment(&self, label: &str) -> Option<Vec<F>> {
        let idx = self.model.compartments().iter().position(|c| *c == label)?;
        Some(self.states.iter().map(|s| s[idx]).collect())
    }

    /// CSV with header `t,<compartment labels...>`, one row per step.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,{}", self.model.compartments().join(","))?;
        for (step, state) in self.states.iter().enumerate() {
            let row: Vec<String> = state.iter().map(|c| format!("{c}")).collect();
            writeln!(w, "{},{}", self.time(step), row.join(","))?;
        }
        Ok(())
    }
}

/// Integrates the model ODEs with fixed-step fourth-order Runge–Kutta.
///
/// Produces `steps + 1` states. Counts that dip below zero by less than
/// [`NEGATIVE_CLAMP`] are clamped to zero; larger negatives abort.
pub fn integrate_ode<F: Float>(
    model: Model,
    params: &RateParams<F>,
    init: &CompartmentState<F>,
    steps: usize,
) -> Result<Trajectory<F>> {
    if steps == 0 {
        return Err(Error::invalid("steps must be >= 1"));
    }
    init.check_dimension(model)?;
    params.validate()?;

    let n = init.population();
    let dim = init.counts().len();
    let h = params.dt;
    let two = F::of(2.0);
    let six = F::of(6.0);

    let deriv = |x: &[F]| -> Result<Vec<F>> {
        let state = CompartmentState { counts: x.to_vec(), population: n };
        rhs(model, &state, params)
    };

    let mut states = Vec::with_capacity(steps + 1);
    let mut x = init.counts().to_vec();
    states.push(x.clone());

    for _ in 0..steps {
        let k1 = deriv(&x)?;
        let x2: Vec<F> = (0..dim).map(|i| x[i] + h / two * k1[i]).collect();
        let k2 = deriv(&x2)?;
        let x3: Vec<F> = (0..dim).map(|i| x[i] + h / two * k2[i]).collect();
        let k3 = deriv(&x3)?;
        let x4: Vec<F> = (0..dim).map(|i| x[i] + h * k3[i]).collect();
        let k4 = deriv(&x4)?;

        for i in 0..dim {
            x[i] = x[i] + h / six * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
            if x[i] < F::zero() {
                if x[i] > -F::of(NEGATIVE_CLAMP) {
                    x[i] = F::zero();
                } else {
                    return Err(Error::invalid(format!(
                        "compartment {} went negative ({})",
                        model.compartments()[i],
                        x[i]
                    )));
                }
            }
        }
        states.push(x.clone());
    }

    Ok(Trajectory { model, dt: params.dt, states })
}

/// The equilibrium families of a model.
///
/// Every model has a disease-free family (all infected-type compartments
/// zero). SIIDR with μ = 0 degenerates to SIID, which additionally has an
/// endemic family parameterized by the infected level I*; the toolkit
/// reports that family without solving for I*.
#[derive(Debug, Clone)]
pub struct Equilibria<F> {
    model: Model,
    gamma1: F,
    gamma2: F,
    has_endemic: bool,
}

/// Describes the disease-free (and, for SIID, endemic) equilibrium points.
pub fn dfe_points<F: Float>(model: Model, params: &RateParams<F>) -> Equilibria<F> {
    Equilibria {
        model,
        gamma1: params.gamma1,
        gamma2: params.gamma2,
        has_endemic: model == Model::Siidr && params.mu == F::zero() && params.gamma2 > F::zero(),
    }
}

impl<F: Float> Equilibria<F> {
    pub fn model(&self) -> Model {
        self.model
    }

    /// A point of the disease-free family with the given population and
    /// recovered count (S is determined by S + R = N). Models without an R
    /// compartment require `recovered == 0`.
    pub fn dfe_point(&self, population: F, recovered: F) -> Result<CompartmentState<F>> {
        if !(population > F::zero()) {
            return Err(Error::invalid("population must be positive"));
        }
        if recovered < F::zero() || recovered > population {
            return Err(Error::invalid("recovered count must lie in [0, N]"));
        }
        let s = population - recovered;
        let counts = match self.model {
            Model::Si | Model::Sis => {
                if recovered != F::zero() {
                    return Err(Error::invalid(format!(
                        "{} has no recovered compartment",
                        self.model
                    )));
                }
                vec![s, F::zero()]
            }
            Model::Sir => vec![s, F::zero(), recovered],
            Model::Seir => vec![s, F::zero(), F::zero(), recovered],
            Model::Siidr => vec![s, F::zero(), F::zero(), recovered],
        };
        Ok(CompartmentState { population, counts })
    }

    /// Whether an endemic family exists (SIID only, i.e. SIIDR with μ = 0).
    pub fn has_endemic(&self) -> bool {
        self.has_endemic
    }

    /// The SIID endemic point (0, I*, γ₁I*/γ₂, 0) for a given I*.
    pub fn endemic_point(&self, i_star: F) -> Option<CompartmentState<F>> {
        if !self.has_endemic || !(i_star > F::zero()) {
            return None;
        }
        let dormant = self.gamma1 * i_star / self.gamma2;
        let counts = vec![F::zero(), i_star, dormant, F::zero()];
        let population = i_star + dormant;
        Some(CompartmentState { counts, population })
    }

    /// Human-readable description of the families.
    pub fn describe(&self) -> String {
        let mut text = match self.model {
            Model::Si | Model::Sis => "disease-free family: (S, 0) with S = N".to_string(),
            Model::Sir => "disease-free family: (S, 0, R) with S + R = N".to_string(),
            Model::Seir => "disease-free family: (S, 0, 0, R) with S + R = N".to_string(),
            Model::Siidr => "disease-free family: (S, 0, 0, R) with S + R = N".to_string(),
        };
        if self.has_endemic {
            text.push_str("; endemic family (mu = 0): (0, I*, gamma1*I*/gamma2, 0)");
        }
        text
    }
}

/// Next-generation matrix of SIIDR at the all-susceptible equilibrium,
/// [[β/μ, β/μ], [0, 0]]. Requires μ > 0 and γ₂ > 0: otherwise the loss
/// matrix of the infected subsystem is singular.
pub fn next_generation_matrix<F: Float>(params: &RateParams<F>) -> Result<[[F; 2]; 2]> {
    if params.mu == F::zero() || params.gamma2 == F::zero() {
        return Err(Error::SingularMatrix(
            "next-generation matrix needs mu > 0 and gamma2 > 0".into(),
        ));
    }
    let ratio = params.beta / params.mu;
    Ok([[ratio, ratio], [F::zero(), F::zero()]])
}

/// Largest-magnitude eigenvalue of a real 2×2 matrix with real spectrum.
pub fn spectral_radius_2x2<F: Float>(m: &[[F; 2]; 2]) -> F {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let two = F::of(2.0);
    let disc = (tr * tr - F::of(4.0) * det).max(F::zero()).sqrt();
    let l1 = (tr + disc) / two;
    let l2 = (tr - disc) / two;
    if l1.abs() >= l2.abs() {
        l1
    } else {
        l2
    }
}

/// Basic reproduction number scaled by the susceptible fraction:
/// (β/μ)·fraction. The fully susceptible case is `fraction = 1`.
pub fn r0<F: Float>(params: &RateParams<F>, susceptible_fraction: F) -> Result<F> {
    if params.mu == F::zero() {
        return Err(Error::invalid("r0 undefined for mu = 0"));
    }
    if susceptible_fraction < F::zero() || susceptible_fraction > F::one() {
        return Err(Error::invalid("susceptible fraction must lie in [0, 1]"));
    }
    Ok(params.beta / params.mu * susceptible_fraction)
}

/// `r0` with a fully susceptible population.
pub fn r0_basic<F: Float>(params: &RateParams<F>) -> Result<F> {
    r0(params, F::one())
}

/// L = I + I_D and its time derivative along a SIIDR trajectory.
#[derive(Debug, Clone)]
pub struct LyapunovSeries<F> {
    /// L_t = I_t + I_D,t.
    pub l: Vec<F>,
    /// L̇_t = βS_tI_t/N − μI_t.
    pub l_dot: Vec<F>,
    /// True when L̇_t ≤ 0 at every step.
    pub l_dot_nonpositive: bool,
}

impl<F: Float> LyapunovSeries<F> {
    /// True when L never increases by more than `tol` between steps.
    pub fn l_nonincreasing(&self, tol: F) -> bool {
        self.l.windows(2).all(|w| w[1] <= w[0] + tol)
    }
}

/// Evaluates the SIIDR Lyapunov function along a trajectory.
pub fn lyapunov_series<F: Float>(
    trajectory: &Trajectory<F>,
    params: &RateParams<F>,
) -> Result<LyapunovSeries<F>> {
    if trajectory.model != Model::Siidr {
        return Err(Error::invalid("Lyapunov series is defined for SIIDR trajectories"));
    }
    let n: F = trajectory
        .states
        .first()
        .ok_or_else(|| Error::invalid("empty trajectory"))?
        .iter()
        .copied()
        .sum();
    let mut l = Vec::with_capacity(trajectory.len());
    let mut l_dot = Vec::with_capacity(trajectory.len());
    for state in &trajectory.states {
        l.push(state[1] + state[2]);
        l_dot.push(params.beta * state[0] * state[1] / n - params.mu * state[1]);
    }
    let l_dot_nonpositive = l_dot.iter().all(|d| *d <= F::zero());
    Ok(LyapunovSeries { l, l_dot, l_dot_nonpositive })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn siidr_params(beta: f64, mu: f64, gamma1: f64, gamma2: f64, dt: f64) -> RateParams<f64> {
        RateParams::siidr(beta, mu, gamma1, gamma2, dt).unwrap()
    }

    #[test]
    fn rhs_is_zero_at_disease_free_start() {
        let params = siidr_params(0.7, 0.2, 0.3, 0.4, 0.1);
        let state = CompartmentState::new(vec![100.0, 0.0, 0.0, 0.0]).unwrap();
        let dx = rhs(Model::Siidr, &state, &params).unwrap();
        assert!(dx.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn rhs_matches_direct_substitution() {
        // N=100, (90,10,0,0), beta=0.5, mu=0.1, gamma1=0.2, gamma2=0.3:
        // dS = -0.5*90*10/100 = -4.5; dI = 4.5 - 1 - 2 = 1.5; dI_D = 2; dR = 1.
        let params = siidr_params(0.5, 0.1, 0.2, 0.3, 0.1);
        let state = CompartmentState::new(vec![90.0, 10.0, 0.0, 0.0]).unwrap();
        let dx = rhs(Model::Siidr, &state, &params).unwrap();
        assert_relative_eq!(dx[0], -4.5, max_relative = 1e-12);
        assert_relative_eq!(dx[1], 1.5, max_relative = 1e-12);
        assert_relative_eq!(dx[2], 2.0, max_relative = 1e-12);
        assert_relative_eq!(dx[3], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn rhs_sums_to_zero_for_every_model() {
        let params = RateParams::new(0.6, 0.25, 0.15, 0.35, 0.45, 0.1).unwrap();
        let states = [
            (Model::Si, vec![70.0, 30.0]),
            (Model::Sis, vec![55.0, 45.0]),
            (Model::Sir, vec![60.0, 25.0, 15.0]),
            (Model::Seir, vec![50.0, 20.0, 20.0, 10.0]),
            (Model::Siidr, vec![40.0, 30.0, 20.0, 10.0]),
        ];
        for (model, counts) in states {
            let state = CompartmentState::new(counts).unwrap();
            let dx = rhs(model, &state, &params).unwrap();
            let sum: f64 = dx.iter().sum();
            assert!(sum.abs() < 1e-12, "{model}: sum {sum}");
        }
    }

    #[test]
    fn rhs_rejects_dimension_mismatch() {
        let params = siidr_params(0.5, 0.1, 0.2, 0.3, 0.1);
        let state = CompartmentState::new(vec![90.0, 10.0]).unwrap();
        assert!(matches!(
            rhs(Model::Siidr, &state, &params),
            Err(Error::DimensionMismatch { expected: 4, got: 2 })
        ));
    }

    #[test]
    fn integrate_holds_at_dfe() {
        let params = siidr_params(0.9, 0.1, 0.4, 0.2, 0.05);
        let init = CompartmentState::new(vec![60.0, 0.0, 0.0, 40.0]).unwrap();
        let traj = integrate_ode(Model::Siidr, &params, &init, 50).unwrap();
        assert_eq!(traj.len(), 51);
        for state in &traj.states {
            assert_eq!(state, init.counts());
        }
    }

    #[test]
    fn integrate_conserves_population() {
        let params = siidr_params(0.8, 0.15, 0.3, 0.25, 0.05);
        let init = CompartmentState::new(vec![990.0, 10.0, 0.0, 0.0]).unwrap();
        let traj = integrate_ode(Model::Siidr, &params, &init, 2000).unwrap();
        for state in &traj.states {
            let sum: f64 = state.iter().sum();
            assert!((sum - 1000.0).abs() <= 1e-9 * 1000.0);
            assert!(state.iter().all(|c| *c >= 0.0));
        }
    }

    #[test]
    fn no_transmission_never_grows_infected_mass() {
        let params = siidr_params(0.0, 0.2, 0.3, 0.1, 0.05);
        let init = CompartmentState::new(vec![80.0, 15.0, 5.0, 0.0]).unwrap();
        let traj = integrate_ode(Model::Siidr, &params, &init, 800).unwrap();
        let start = 15.0 + 5.0;
        for state in &traj.states {
            // I + I_D + newly recovered never exceeds the initial I + I_D.
            assert!(state[1] + state[2] + state[3] <= start + 1e-9);
        }
    }

    /// Independent oracle: tiny hand-rolled RK4 at dt/100, separate from the
    /// library integrator.
    fn reference_final_cumulative(params: &RateParams<f64>, init: &[f64], steps: usize) -> f64 {
        let n: f64 = init.iter().sum();
        let f = |x: &[f64; 4]| -> [f64; 4] {
            let force = params.beta * x[0] * x[1] / n;
            [
                -force,
                force - params.mu * x[1] - params.gamma1 * x[1] + params.gamma2 * x[2],
                params.gamma1 * x[1] - params.gamma2 * x[2],
                params.mu * x[1],
            ]
        };
        let h = params.dt / 100.0;
        let mut x = [init[0], init[1], init[2], init[3]];
        for _ in 0..steps * 100 {
            let k1 = f(&x);
            let mut x2 = x;
            let mut x3 = x;
            let mut x4 = x;
            for i in 0..4 {
                x2[i] = x[i] + h / 2.0 * k1[i];
            }
            let k2 = f(&x2);
            for i in 0..4 {
                x3[i] = x[i] + h / 2.0 * k2[i];
            }
            let k3 = f(&x3);
            for i in 0..4 {
                x4[i] = x[i] + h * k3[i];
            }
            let k4 = f(&x4);
            for i in 0..4 {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        x[1] + x[2] + x[3]
    }

    #[test]
    fn integrate_agrees_with_fine_step_reference() {
        let params = siidr_params(0.16, 0.11, 0.79, 0.06, 0.5);
        let init = vec![36.0, 1.0, 0.0, 0.0];
        let steps = 2000;
        let state = CompartmentState::new(init.clone()).unwrap();
        let traj = integrate_ode(Model::Siidr, &params, &state, steps).unwrap();
        let got = Model::Siidr.cumulative_infected(traj.states.last().unwrap());
        let expected = reference_final_cumulative(&params, &init, steps);
        assert!(
            (got - expected).abs() / expected < 0.01,
            "got {got}, reference {expected}"
        );
    }

    #[test]
    fn dfe_family_members_are_fixed_points() {
        let params = siidr_params(0.5, 0.2, 0.3, 0.4, 0.1);
        let eq = dfe_points(Model::Siidr, &params);
        for recovered in [0.0, 12.5, 100.0] {
            let point = eq.dfe_point(100.0, recovered).unwrap();
            assert_eq!(point.counts()[1], 0.0);
            assert_eq!(point.counts()[2], 0.0);
            let dx = rhs(Model::Siidr, &point, &params).unwrap();
            assert!(dx.iter().all(|d| *d == 0.0), "rhs at {:?} is {:?}", point.counts(), dx);
        }
        // R = 0 gives the all-susceptible point (N, 0, 0, 0).
        let point = eq.dfe_point(100.0, 0.0).unwrap();
        assert_eq!(point.counts(), &[100.0, 0.0, 0.0, 0.0]);
        assert!(!eq.has_endemic());
    }

    #[test]
    fn siid_endemic_point_is_fixed() {
        let params = siidr_params(0.5, 0.0, 0.3, 0.4, 0.1);
        let eq = dfe_points(Model::Siidr, &params);
        assert!(eq.has_endemic());
        let point = eq.endemic_point(10.0).unwrap();
        assert_relative_eq!(point.counts()[2], 0.3 * 10.0 / 0.4, max_relative = 1e-12);
        let dx = rhs(Model::Siidr, &point, &params).unwrap();
        assert!(dx.iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn ngm_matches_closed_form() {
        let params = siidr_params(0.2, 0.1, 0.3, 0.4, 0.1);
        let g = next_generation_matrix(&params).unwrap();
        assert_relative_eq!(g[0][0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(g[0][1], 2.0, max_relative = 1e-12);
        assert_eq!(g[1][0], 0.0);
        assert_eq!(g[1][1], 0.0);
        // Eigenvalues are {0, beta/mu}.
        assert_relative_eq!(spectral_radius_2x2(&g), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn ngm_zero_beta_gives_zero_matrix() {
        let params = siidr_params(0.0, 0.1, 0.3, 0.4, 0.1);
        let g = next_generation_matrix(&params).unwrap();
        assert_eq!(g, [[0.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn ngm_singular_when_mu_or_gamma2_zero() {
        let p1 = siidr_params(0.5, 0.0, 0.3, 0.4, 0.1);
        assert!(matches!(next_generation_matrix(&p1), Err(Error::SingularMatrix(_))));
        let p2 = siidr_params(0.5, 0.1, 0.3, 0.0, 0.1);
        assert!(matches!(next_generation_matrix(&p2), Err(Error::SingularMatrix(_))));
    }

    #[test]
    fn r0_formula() {
        let params = siidr_params(0.2, 0.1, 0.3, 0.4, 0.1);
        assert_relative_eq!(r0(&params, 1.0).unwrap(), 2.0, max_relative = 1e-15);
        assert_relative_eq!(r0(&params, 0.5).unwrap(), 1.0, max_relative = 1e-15);
        let threshold = siidr_params(0.1, 0.1, 0.3, 0.4, 0.1);
        assert_relative_eq!(r0_basic(&threshold).unwrap(), 1.0, max_relative = 1e-15);
        let no_recovery = siidr_params(0.2, 0.0, 0.3, 0.4, 0.1);
        assert!(r0(&no_recovery, 1.0).is_err());
    }

    #[test]
    fn lyapunov_zero_at_dfe() {
        let params = siidr_params(0.5, 0.2, 0.3, 0.4, 0.1);
        let init = dfe_points(Model::Siidr, &params).dfe_point(50.0, 10.0).unwrap();
        let traj = integrate_ode(Model::Siidr, &params, &init, 20).unwrap();
        let series = lyapunov_series(&traj, &params).unwrap();
        assert!(series.l.iter().all(|v| *v == 0.0));
        assert!(series.l_dot.iter().all(|v| *v == 0.0));
        assert!(series.l_dot_nonpositive);
    }

    #[test]
    fn lyapunov_nonincreasing_below_threshold() {
        // beta <= mu means R0 <= 1 for any susceptible fraction.
        let params = siidr_params(0.1, 0.2, 0.3, 0.4, 0.05);
        let init = CompartmentState::new(vec![80.0, 15.0, 5.0, 0.0]).unwrap();
        let traj = integrate_ode(Model::Siidr, &params, &init, 2000).unwrap();
        let series = lyapunov_series(&traj, &params).unwrap();
        assert!(series.l_dot_nonpositive);
        assert!(series.l_nonincreasing(1e-9));
    }

    #[test]
    fn lyapunov_grows_above_threshold_at_start() {
        let params = siidr_params(0.5, 0.1, 0.2, 0.3, 0.05);
        let init = CompartmentState::new(vec![90.0, 10.0, 0.0, 0.0]).unwrap();
        let traj = integrate_ode(Model::Siidr, &params, &init, 10).unwrap();
        let series = lyapunov_series(&traj, &params).unwrap();
        // Sign of L̇(0) matches sign of I(0)·(R0_eff − 1) with R0_eff = βS/(μN).
        assert!(series.l_dot[0] > 0.0);
        assert!(!series.l_dot_nonpositive);
    }

    #[test]
    fn lyapunov_sign_matches_r0_threshold() {
        let cases = [(0.3, 0.4), (0.25, 0.25), (0.6, 0.2)];
        for (beta, mu) in cases {
            let params = siidr_params(beta, mu, 0.3, 0.4, 0.05);
            let init = CompartmentState::new(vec![900.0, 100.0, 0.0, 0.0]).unwrap();
            let traj = integrate_ode(Model::Siidr, &params, &init, 1).unwrap();
            let series = lyapunov_series(&traj, &params).unwrap();
            let frac = 900.0 / 1000.0;
            let r = r0(&params, frac).unwrap();
            let expected_sign = (100.0 * (r - 1.0)).signum();
            if expected_sign == 0.0 {
                assert!(series.l_dot[0].abs() < 1e-12);
            } else {
                assert_eq!(series.l_dot[0].signum(), expected_sign);
            }
        }
    }

    #[test]
    fn seir_uses_sigma_for_incubation() {
        let params = RateParams::seir(0.5, 0.1, 0.25, 0.1).unwrap();
        let state = CompartmentState::new(vec![70.0, 20.0, 10.0, 0.0]).unwrap();
        let dx = rhs(Model::Seir, &state, &params).unwrap();
        let force = 0.5 * 70.0 * 10.0 / 100.0;
        assert_relative_eq!(dx[1], force - 0.25 * 20.0, max_relative = 1e-12);
        assert_relative_eq!(dx[2], 0.25 * 20.0 - 0.1 * 10.0, max_relative = 1e-12);
    }

    #[test]
    fn generic_math_works_in_f32() {
        let params = RateParams::<f32>::siidr(0.5, 0.1, 0.2, 0.3, 0.1).unwrap();
        let state = CompartmentState::new(vec![90.0f32, 10.0, 0.0, 0.0]).unwrap();
        let dx = rhs(Model::Siidr, &state, &params).unwrap();
        assert!((dx[0] + 4.5).abs() < 1e-5);
        assert!((r0_basic(&params).unwrap() - 5.0).abs() < 1e-5);
    }

    #[test]
    fn trajectory_csv_has_header_and_rows() {
        let params = siidr_params(0.5, 0.1, 0.2, 0.3, 0.5);
        let init = CompartmentState::new(vec![99.0, 1.0, 0.0, 0.0]).unwrap();
        let traj = integrate_ode(Model::Siidr, &params, &init, 2).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,S,I,I_D,R");
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(RateParams::siidr(-0.1, 0.1, 0.2, 0.3, 0.1).is_err());
        assert!(RateParams::siidr(0.1, 0.1, 0.2, 0.3, 0.0).is_err());
        assert!(CompartmentState::new(vec![-1.0, 5.0]).is_err());
        assert!(CompartmentState::new(vec![0.0, 0.0]).is_err());
    }
}
