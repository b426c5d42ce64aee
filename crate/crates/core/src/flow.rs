//! Classical fourth-order Runge–Kutta integration of semi-discrete gradient
//! flows, shared by the scalar and tensor solvers.

use crate::error::{invalid, Error, Result};

/// Time-stepping controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowConfig {
    /// Fixed step. `None` picks `safety * 2 / ρ`, with `ρ` a Gershgorin bound
    /// of the linearized right-hand side (`safety * h²/4` on a plain grid).
    pub dt: Option<f64>,
    pub t_max: f64,
    /// Convergence threshold on `max |∂u/∂t|`.
    pub steady_tol: f64,
    /// Diagnostics are recorded every this many steps.
    pub record_every: usize,
    pub safety: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig { dt: None, t_max: 500.0, steady_tol: 1e-8, record_every: 200, safety: 0.9 }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return invalid(format!("t_max = {} must be positive", self.t_max));
        }
        if !(self.steady_tol > 0.0) {
            return invalid(format!("steady_tol = {} must be positive", self.steady_tol));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return invalid(format!("safety = {} outside (0, 1]", self.safety));
        }
        if self.record_every == 0 {
            return invalid("record_every must be at least 1");
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return invalid(format!("dt = {dt} must be positive"));
            }
        }
        Ok(())
    }

    /// Step size for a system whose right-hand side has Jacobian bounded by
    /// `rho` in the Gershgorin sense.
    pub fn step_for(&self, rho: f64) -> Result<f64> {
        self.validate()?;
        let limit = self.safety * 2.0 / rho;
        match self.dt {
            None => Ok(limit),
            Some(dt) if dt <= limit * (1.0 + 1e-12) => Ok(dt),
            Some(dt) => invalid(format!("dt = {dt} exceeds the stability limit {limit:e}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowStatus {
    Converged,
    TimedOut,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagRecord {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub residual: f64,
    /// System-specific monitors (for the tensor flow: `max|Q33 + B/3C|`,
    /// `max|Q13|`, `max|Q23|`).
    pub extra: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub records: Vec<DiagRecord>,
    pub steps: usize,
    pub t: f64,
    pub dt: f64,
    pub residual: f64,
    pub status: FlowStatus,
}

impl Diagnostics {
    pub fn converged(&self) -> bool {
        self.status == FlowStatus::Converged
    }

    /// Largest relative energy increase between consecutive records after the
    /// first one; `None` if the energy never increases.
    pub fn worst_energy_increase(&self) -> Option<(usize, f64)> {
        let mut worst: Option<(usize, f64)> = None;
        for w in self.records.windows(2).skip(1) {
            let inc = (w[1].energy - w[0].energy) / w[0].energy.abs().max(1e-300);
            if inc > 0.0 && worst.map_or(true, |(_, v)| inc > v) {
                worst = Some((w[1].step, inc));
            }
        }
        worst
    }
}

/// A semi-discrete system `du/dt = F(u)` on a flat state vector.
pub trait FlowSystem {
    fn dim(&self) -> usize;
    /// Writes `F(state)` into `out`; entries of fixed (boundary) unknowns are 0.
    fn rhs(&self, state: &[f64], out: &mut [f64]);
    fn energy(&self, state: &[f64]) -> f64;
    /// Gershgorin bound of the Jacobian of `F`.
    fn stiffness(&self) -> f64;
    fn monitors(&self, _state: &[f64]) -> Vec<f64> {
        Vec::new()
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for &x in v {
        let a = x.abs();
        if !(a <= m) {
            m = if a.is_nan() { f64::NAN } else { a };
            if m.is_nan() {
                return m;
            }
        }
    }
    m
}

/// RK4 stepper owning its stage buffers.
pub struct Rk4<'a, S: FlowSystem> {
    sys: &'a S,
    dt: f64,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a, S: FlowSystem> Rk4<'a, S> {
    pub fn new(sys: &'a S, dt: f64) -> Self {
        let d = sys.dim();
        Rk4 { sys, dt, k: [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]], tmp: vec![0.0; d] }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Evaluates the first stage at `state` and returns `max |F(state)|`.
    pub fn residual(&mut self, state: &[f64]) -> f64 {
        self.sys.rhs(state, &mut self.k[0]);
        max_abs(&self.k[0])
    }

    /// Advances `state` by one step, reusing the first stage computed by the
    /// preceding call to [`Rk4::residual`].
    pub fn advance(&mut self, state: &mut [f64]) {
        let dt = self.dt;
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        for ((t, u), a) in tmp.iter_mut().zip(state.iter()).zip(k1.iter()) {
            *t = u + 0.5 * dt * a;
        }
        self.sys.rhs(tmp, k2);
        for ((t, u), a) in tmp.iter_mut().zip(state.iter()).zip(k2.iter()) {
            *t = u + 0.5 * dt * a;
        }
        self.sys.rhs(tmp, k3);
        for ((t, u), a) in tmp.iter_mut().zip(state.iter()).zip(k3.iter()) {
            *t = u + dt * a;
        }
        self.sys.rhs(tmp, k4);
        let w = dt / 6.0;
        for i in 0..state.len() {
            state[i] += w * ((k1[i] + k4[i]) + 2.0 * (k2[i] + k3[i]));
        }
    }

    /// One full step; returns the residual at the pre-step state.
    pub fn step(&mut self, state: &mut [f64]) -> f64 {
        let r = self.residual(state);
        self.advance(state);
        r
    }
}

/// Runs the flow until `max |F| < steady_tol` or `t_max`.
pub fn integrate<S: FlowSystem>(sys: &S, state: &mut [f64], cfg: &FlowConfig) -> Result<Diagnostics> {
    let dt = cfg.step_for(sys.stiffness())?;
    let mut rk = Rk4::new(sys, dt);
    let mut records = Vec::new();
    let mut step = 0usize;
    let mut t = 0.0;
    let max_steps = (cfg.t_max / dt).ceil() as usize;
    loop {
        let res = rk.residual(state);
        if !res.is_finite() {
            return Err(Error::Divergence { step, t });
        }
        let done = res < cfg.steady_tol;
        let out_of_time = step >= max_steps;
        if step % cfg.record_every == 0 || done || out_of_time {
            records.push(DiagRecord { step, t, energy: sys.energy(state), residual: res, extra: sys.monitors(state) });
        }
        if done || out_of_time {
            let status = if done { FlowStatus::Converged } else { FlowStatus::TimedOut };
            return Ok(Diagnostics { records, steps: step, t, dt, residual: res, status });
        }
        rk.advance(state);
        step += 1;
        t = step as f64 * dt;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl FlowSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, s: &[f64], out: &mut [f64]) {
            out[0] = -s[0];
        }
        fn energy(&self, s: &[f64]) -> f64 {
            0.5 * s[0] * s[0]
        }
        fn stiffness(&self) -> f64 {
            1.0
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let mut errs = Vec::new();
        for &dt in &[0.1, 0.05] {
            let mut u = [1.0];
            let mut rk = Rk4::new(&Decay, dt);
            let n = (1.0 / dt) as usize;
            for _ in 0..n {
                rk.step(&mut u);
            }
            errs.push((u[0] - (-1f64).exp()).abs());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!((order - 4.0).abs() < 0.2, "{order}");
    }

    #[test]
    fn integrate_converges_and_times_out() {
        let cfg = FlowConfig { dt: Some(0.1), t_max: 100.0, steady_tol: 1e-6, record_every: 1, safety: 0.9 };
        let mut u = [1.0];
        let d = integrate(&Decay, &mut u, &cfg).unwrap();
        assert!(d.converged());
        assert!(d.worst_energy_increase().is_none());
        let cfg = FlowConfig { t_max: 1.0, ..cfg };
        let mut u = [1.0];
        let d = integrate(&Decay, &mut u, &cfg).unwrap();
        assert_eq!(d.status, FlowStatus::TimedOut);
    }

    #[test]
    fn rejects_unstable_dt() {
        let cfg = FlowConfig { dt: Some(5.0), ..FlowConfig::default() };
        assert!(integrate(&Decay, &mut [1.0], &cfg).is_err());
    }

    struct Blowup;
    impl FlowSystem for Blowup {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, s: &[f64], out: &mut [f64]) {
            out[0] = s[0] * s[0] * s[0];
        }
        fn energy(&self, _: &[f64]) -> f64 {
            0.0
        }
        fn stiffness(&self) -> f64 {
            1.0
        }
    }

    #[test]
    fn divergence_names_step() {
        let cfg = FlowConfig { dt: Some(1.0), t_max: 1e6, ..FlowConfig::default() };
        match integrate(&Blowup, &mut [10.0], &cfg) {
            Err(Error::Divergence { step, .. }) => assert!(step > 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn max_abs_propagates_nan() {
        assert!(max_abs(&[1.0, f64::NAN, 2.0]).is_nan());
        assert_eq!(max_abs(&[1.0, -3.0]), 3.0);
    }
}
