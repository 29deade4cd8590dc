use super::statespace::{LqgWeights, StateSpace};
use crate::error::{Error, Result};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// A causal output-feedback law `u_t = pi(y_0, ..., y_t)`.
pub trait Controller {
    /// Consume `y_t`, return the commanded input `u_t`.
    fn step(&mut self, y: &DVector<f64>) -> DVector<f64>;
    /// Clear internal state.
    fn reset(&mut self);
}

/// How the commanded input is produced.
pub enum Policy<'a> {
    /// `u_t = 0`.
    Zero,
    /// `u_t ~ N(0, sigma_u^2 I)`, the identification excitation.
    Excitation,
    /// Prescribed inputs (missing steps are zero).
    Inputs(&'a [DVector<f64>]),
    Feedback(&'a mut dyn Controller),
}

/// Recorded signals. `inputs` holds the commanded input; the plant receives
/// `inputs[t] + process_noise[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub inputs: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
    pub states: Option<Vec<DVector<f64>>>,
    pub process_noise: Option<Vec<DVector<f64>>>,
    pub measurement_noise: Option<Vec<DVector<f64>>>,
    pub seed: u64,
}

/// States beyond this norm are treated as divergence.
pub const DIVERGENCE_GUARD: f64 = 1e12;

fn gaussian(rng: &mut ChaCha8Rng, n: usize, sigma: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        sigma * z
    })
}

/// Run `x+ = Ax + B(u + w)`, `y = Cx + v` from `x_0 = 0`.
///
/// Per step the generator draws `v_t`, then the excitation (if any), then
/// `w_t`, so a seed fixes all signals regardless of the policy.
pub fn simulate(ss: &StateSpace, mut policy: Policy<'_>, horizon: usize, weights: &LqgWeights, seed: u64) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::Validation("simulation horizon must be positive".into()));
    }
    let (n, m, p) = (ss.n(), ss.m(), ss.p());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DVector::zeros(n);
    let mut traj = Trajectory {
        inputs: Vec::with_capacity(horizon),
        outputs: Vec::with_capacity(horizon),
        states: Some(Vec::with_capacity(horizon)),
        process_noise: Some(Vec::with_capacity(horizon)),
        measurement_noise: Some(Vec::with_capacity(horizon)),
        seed,
    };
    for t in 0..horizon {
        let v = gaussian(&mut rng, p, weights.sigma_v);
        let y = &ss.c * &x + &v;
        let u = match &mut policy {
            Policy::Zero => DVector::zeros(m),
            Policy::Excitation => gaussian(&mut rng, m, weights.sigma_u),
            Policy::Inputs(us) => us.get(t).cloned().unwrap_or_else(|| DVector::zeros(m)),
            Policy::Feedback(k) => k.step(&y),
        };
        if u.len() != m {
            return Err(Error::Dimension(format!("policy produced {} inputs, plant takes {m}", u.len())));
        }
        let w = gaussian(&mut rng, m, weights.sigma_w);
        let next = &ss.a * &x + &ss.b * (&u + &w);
        traj.states.as_mut().unwrap().push(x);
        traj.inputs.push(u);
        traj.outputs.push(y);
        traj.process_noise.as_mut().unwrap().push(w);
        traj.measurement_noise.as_mut().unwrap().push(v);
        if !(next.norm() <= DIVERGENCE_GUARD) {
            return Err(Error::Divergence(t));
        }
        x = next;
    }
    Ok(traj)
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.outputs.len()
    }

    /// Recompute outputs from the recorded inputs and noises.
    pub fn replay(&self, ss: &StateSpace) -> Result<Vec<DVector<f64>>> {
        let (Some(w), Some(v)) = (&self.process_noise, &self.measurement_noise) else {
            return Err(Error::Validation("trajectory has no recorded noise".into()));
        };
        let mut x = DVector::zeros(ss.n());
        let mut out = Vec::with_capacity(self.horizon());
        for t in 0..self.horizon() {
            out.push(&ss.c * &x + &v[t]);
            x = &ss.a * &x + &ss.b * (&self.inputs[t] + &w[t]);
        }
        Ok(out)
    }

    /// CSV with header `t,u_0..u_{m-1},y_0..y_{p-1}` (commanded inputs).
    pub fn to_csv(&self) -> String {
        let m = self.inputs.first().map_or(0, |u| u.len());
        let p = self.outputs.first().map_or(0, |y| y.len());
        let mut s = String::from("t");
        (0..m).for_each(|i| s.push_str(&format!(",u_{i}")));
        (0..p).for_each(|i| s.push_str(&format!(",y_{i}")));
        s.push('\n');
        for t in 0..self.horizon() {
            s.push_str(&t.to_string());
            for v in self.inputs[t].iter().chain(self.outputs[t].iter()) {
                s.push_str(&format!(",{v:?}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Trajectory> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines.next().ok_or_else(|| Error::Validation("empty CSV".into()))?.split(',').map(str::trim).collect();
        if header.first() != Some(&"t") {
            return Err(Error::Validation("CSV header must start with t".into()));
        }
        let m = header.iter().filter(|h| h.starts_with("u_")).count();
        let p = header.iter().filter(|h| h.starts_with("y_")).count();
        if m + p + 1 != header.len() {
            return Err(Error::Validation(format!("unexpected CSV columns {header:?}")));
        }
        let mut traj = Trajectory { inputs: vec![], outputs: vec![], states: None, process_noise: None, measurement_noise: None, seed: 0 };
        for (row, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split(',')
                .skip(1)
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Validation(format!("CSV row {row}: {e}")))?;
            if vals.len() != m + p {
                return Err(Error::Validation(format!("CSV row {row} has {} values, expected {}", vals.len(), m + p)));
            }
            traj.inputs.push(DVector::from_column_slice(&vals[..m]));
            traj.outputs.push(DVector::from_column_slice(&vals[m..]));
        }
        Ok(traj)
    }
}
