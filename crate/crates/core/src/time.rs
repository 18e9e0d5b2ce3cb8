//! Three-stage SSP Runge-Kutta integration with CFL-limited steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{State, SystemModel};
use crate::scheme::Scheme;

pub const DEFAULT_CFL: f64 = 0.5;

/// Extra cap on the step size on top of the CFL restriction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DtRule {
    #[default]
    Standard,
    /// `dt <= c * dx^(5/3)`.
    Dx53 { c: f64 },
}

impl DtRule {
    /// The `dx^(5/3)` rule that coincides with the CFL step at `dx_ref` for
    /// a largest speed `speed_ref`.
    pub fn dx53_calibrated(cfl: f64, dx_ref: f64, speed_ref: f64) -> Self {
        DtRule::Dx53 {
            c: cfl * dx_ref / speed_ref / dx_ref.powf(5.0 / 3.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeControls {
    pub cfl: f64,
    pub t_final: f64,
    #[serde(default)]
    pub dt_rule: DtRule,
    /// Sorted snapshot times in `(0, t_final]`.
    #[serde(default)]
    pub output_times: Vec<f64>,
}

impl TimeControls {
    pub fn new(t_final: f64) -> Self {
        Self {
            cfl: DEFAULT_CFL,
            t_final,
            dt_rule: DtRule::Standard,
            output_times: Vec::new(),
        }
    }

    pub fn with_outputs(mut self, times: &[f64]) -> Self {
        self.output_times = times.to_vec();
        self
    }

    pub fn with_rule(mut self, rule: DtRule) -> Self {
        self.dt_rule = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::config(
                "cfl",
                format!("must lie in (0, 1], got {}", self.cfl),
            ));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::config(
                "t_final",
                format!("must be positive, got {}", self.t_final),
            ));
        }
        if self.output_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("output_times", "must be strictly increasing"));
        }
        if let Some(&t) = self
            .output_times
            .iter()
            .find(|&&t| !(t > 0.0 && t <= self.t_final))
        {
            return Err(Error::config(
                "output_times",
                format!("{t} lies outside (0, t_final]"),
            ));
        }
        if let DtRule::Dx53 { c } = self.dt_rule {
            if !(c > 0.0) {
                return Err(Error::config(
                    "dt_rule.c",
                    format!("must be positive, got {c}"),
                ));
            }
        }
        Ok(())
    }

    /// Next time the integrator must land on exactly.
    pub fn next_stop(&self, t: f64) -> f64 {
        self.output_times
            .iter()
            .copied()
            .find(|&s| s > t)
            .unwrap_or(self.t_final)
            .min(self.t_final)
    }
}

/// Step size from the largest one-sided speed, clipped to `stop`.
pub fn compute_dt(max_speed: f64, dx: f64, controls: &TimeControls, t: f64, stop: f64) -> f64 {
    let gap = stop - t;
    let mut dt = if max_speed > 0.0 {
        controls.cfl * dx / max_speed
    } else {
        gap
    };
    if let DtRule::Dx53 { c } = controls.dt_rule {
        dt = dt.min(c * dx.powf(5.0 / 3.0));
    }
    // avoid leaving a sliver step in front of the stop time
    if dt >= gap || gap - dt < 1e-12 * gap.max(1.0) {
        gap
    } else {
        dt
    }
}

/// One SSP-RK3 step on flat data. `rhs(u, out)` may modify `u` in place
/// (ghost filling) but not its interior values.
pub fn ssp_rk3_step(
    u: &mut [f64],
    dt: f64,
    mut rhs: impl FnMut(&mut [f64], &mut [f64]) -> Result<()>,
) -> Result<()> {
    let mut k = vec![0.0; u.len()];
    rhs(u, &mut k)?;
    ssp_rk3_finish(u, &k, dt, rhs, &mut Vec::new(), &mut Vec::new())
}

/// Completes an SSP-RK3 step given the first-stage derivative `k1 = L(u)`.
/// `stage` and `k` are caller-owned scratch buffers.
pub fn ssp_rk3_finish(
    u: &mut [f64],
    k1: &[f64],
    dt: f64,
    mut rhs: impl FnMut(&mut [f64], &mut [f64]) -> Result<()>,
    stage: &mut Vec<f64>,
    k: &mut Vec<f64>,
) -> Result<()> {
    let n = u.len();
    stage.resize(n, 0.0);
    k.resize(n, 0.0);
    for i in 0..n {
        stage[i] = u[i] + dt * k1[i];
    }
    rhs(stage, k)?;
    // increment form of the Shu-Osher stages: a vanishing right-hand side
    // leaves u bitwise unchanged
    for i in 0..n {
        stage[i] = u[i] + 0.25 * dt * (k1[i] + k[i]);
    }
    rhs(stage, k)?;
    for i in 0..n {
        u[i] += 2.0 / 3.0 * ((stage[i] - u[i]) + dt * k[i]);
    }
    Ok(())
}

/// Statistics of one [`integrate`] call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: u64,
    pub t_end: f64,
    pub min_dt: f64,
    pub max_dt: f64,
}

/// Advances `u` from `t0` to `controls.t_final`, calling `on_output` at each
/// output time (and at `t_final` if it is not listed).
pub fn integrate<M, const N: usize>(
    scheme: &mut Scheme<M, N>,
    u: &mut Vec<State<N>>,
    t0: f64,
    controls: &TimeControls,
    mut on_output: impl FnMut(f64, &[State<N>]) -> Result<()>,
) -> Result<RunStats>
where
    M: SystemModel<N>,
{
    integrate_until(scheme, u, t0, controls, &mut on_output, |_, _| false)
}

/// Like [`integrate`], but stops early once `stop_when(t, max |dU/dt|)`
/// returns true after a completed step.
pub fn integrate_until<M, const N: usize>(
    scheme: &mut Scheme<M, N>,
    u: &mut Vec<State<N>>,
    t0: f64,
    controls: &TimeControls,
    on_output: &mut dyn FnMut(f64, &[State<N>]) -> Result<()>,
    mut stop_when: impl FnMut(f64, f64) -> bool,
) -> Result<RunStats>
where
    M: SystemModel<N>,
{
    controls.validate()?;
    let dx = scheme.grid().dx();
    let len = scheme.grid().len_with_ghosts();
    if u.len() != len {
        return Err(Error::Usage(format!(
            "state has {} entries, grid expects {len}",
            u.len()
        )));
    }
    let interior = scheme.grid().interior();
    let mut t = t0;
    let mut stats = RunStats {
        steps: 0,
        t_end: t0,
        min_dt: f64::INFINITY,
        max_dt: 0.0,
    };
    let mut k1 = vec![[0.0; N]; len];
    let mut stage = Vec::new();
    let mut k = Vec::new();
    let mut stage_index;

    while t < controls.t_final {
        let stop = controls.next_stop(t);
        let speed = scheme.rhs(u, &mut k1).map_err(|e| stage_error(1, t, e))?;
        let residual = interior
            .clone()
            .flat_map(|i| k1[i].iter().map(|v| v.abs()))
            .fold(0.0, f64::max);
        if stats.steps > 0 && stop_when(t, residual) {
            break;
        }
        let dt = compute_dt(speed, dx, controls, t, stop);
        stage_index = 2;
        let flat_u = u.as_flattened_mut();
        ssp_rk3_finish(
            flat_u,
            k1.as_flattened(),
            dt,
            |s, out| {
                let s = as_states_mut::<N>(s);
                let o = as_states_mut::<N>(out);
                let r = scheme
                    .rhs(s, o)
                    .map(|_| ())
                    .map_err(|e| stage_error(stage_index, t, e));
                stage_index += 1;
                r
            },
            &mut stage,
            &mut k,
        )?;
        check_finite(&u[interior.clone()], interior.start, scheme.grid(), t + dt)?;
        t = if stop - t == dt { stop } else { t + dt };
        stats.steps += 1;
        stats.min_dt = stats.min_dt.min(dt);
        stats.max_dt = stats.max_dt.max(dt);
        if controls.output_times.contains(&t) || t == controls.t_final {
            on_output(t, u)?;
        }
    }
    stats.t_end = t;
    Ok(stats)
}

fn as_states_mut<const N: usize>(flat: &mut [f64]) -> &mut [State<N>] {
    let (chunks, rest) = flat.as_chunks_mut::<N>();
    debug_assert!(rest.is_empty());
    chunks
}

fn stage_error(stage: usize, time: f64, e: Error) -> Error {
    Error::Stage {
        stage,
        time,
        source: Box::new(e),
    }
}

fn check_finite<const N: usize>(
    u: &[State<N>],
    offset: usize,
    grid: &crate::mesh::Grid,
    time: f64,
) -> Result<()> {
    for (i, s) in u.iter().enumerate() {
        if let Some(c) = s.iter().position(|v| !v.is_finite()) {
            return Err(stage_error(
                3,
                time,
                Error::NonFinite {
                    index: grid.node_index(offset + i),
                    component: c,
                },
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rhs_is_identity() {
        let mut u = vec![1.0, -2.0, 3.5];
        ssp_rk3_step(&mut u, 0.3, |_, out| {
            out.fill(0.0);
            Ok(())
        })
        .unwrap();
        assert_eq!(u, [1.0, -2.0, 3.5]);
    }

    #[test]
    fn linear_ode_matches_cubic_taylor_polynomial() {
        let lambda = -1.7;
        let dt = 0.21;
        let mut u = vec![1.0];
        ssp_rk3_step(&mut u, dt, |s, out| {
            out[0] = lambda * s[0];
            Ok(())
        })
        .unwrap();
        let z: f64 = lambda * dt;
        let taylor = 1.0 + z + z * z / 2.0 + z * z * z / 6.0;
        assert!((u[0] - taylor).abs() < 1e-15);
    }

    #[test]
    fn third_order_convergence() {
        let err = |steps: usize| {
            let dt = 1.0 / steps as f64;
            let mut u = vec![1.0];
            for _ in 0..steps {
                ssp_rk3_step(&mut u, dt, |s, out| {
                    out[0] = -s[0];
                    Ok(())
                })
                .unwrap();
            }
            (u[0] - (-1.0f64).exp()).abs()
        };
        let rate = (err(20) / err(40)).log2();
        assert!((rate - 3.0).abs() < 0.1, "rate {rate}");
    }

    #[test]
    fn dt_formula_and_guards() {
        let c = TimeControls::new(1.0);
        assert_eq!(compute_dt(2.0, 0.1, &c, 0.0, 1.0), 0.025);
        assert_eq!(compute_dt(0.0, 0.1, &c, 0.2, 0.5), 0.3);
        assert!((compute_dt(2.0, 0.1, &c, 0.99, 1.0) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn dx53_rule_takes_over_on_fine_meshes() {
        let rule = DtRule::dx53_calibrated(0.5, 1.0 / 40.0, 10.0);
        let c = TimeControls::new(1.0).with_rule(rule);
        let coarse = compute_dt(10.0, 1.0 / 40.0, &c, 0.0, 1.0);
        assert!((coarse - 0.5 / 400.0).abs() < 1e-15);
        let dx = 1.0 / 1280.0;
        let fine = compute_dt(10.0, dx, &c, 0.0, 1.0);
        assert!(fine < 0.5 * dx / 10.0);
        let DtRule::Dx53 { c: k } = rule else {
            unreachable!()
        };
        assert!((fine - k * dx.powf(5.0 / 3.0)).abs() < 1e-18);
    }

    #[test]
    fn controls_validation() {
        assert!(TimeControls::new(0.0).validate().is_err());
        assert!(TimeControls::new(1.0)
            .with_outputs(&[0.5, 0.2])
            .validate()
            .is_err());
        assert!(TimeControls::new(1.0)
            .with_outputs(&[1.5])
            .validate()
            .is_err());
        let mut c = TimeControls::new(1.0);
        c.cfl = 1.5;
        assert!(c.validate().is_err());
    }
}
