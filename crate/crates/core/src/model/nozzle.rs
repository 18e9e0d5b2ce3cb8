use crate::error::{Error, Result};

use super::{bracketed_newton, Profile, State, SystemModel, WaveSpeeds};

/// Quasi-1-D nozzle flow with pressure law `p = kappa * rho^gamma`.
///
/// Evolved components: `(sigma*rho, q = sigma*rho*u)`; equilibrium
/// variables: `(q, E = u^2/2 + kappa*gamma/(gamma-1) * rho^(gamma-1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nozzle {
    kappa: f64,
    gamma: f64,
    sigma: Profile,
}

/// Root branch of the scalar equilibrium equation for `sigma*rho`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NozzleBranch {
    /// `|u| < c`: the larger density root.
    Subsonic,
    /// `|u| > c`: the smaller density root.
    Supersonic,
}

impl Nozzle {
    pub fn new(kappa: f64, gamma: f64, sigma: Profile) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::Parameter(format!(
                "kappa must be positive, got {kappa}"
            )));
        }
        if !(gamma > 1.0 && gamma < 5.0 / 3.0) {
            return Err(Error::Parameter(format!(
                "gamma must lie in (1, 5/3), got {gamma}"
            )));
        }
        sigma.validate()?;
        Ok(Self {
            kappa,
            gamma,
            sigma,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sigma_profile(&self) -> &Profile {
        &self.sigma
    }

    /// `kappa * gamma / (gamma - 1)`
    fn enthalpy_factor(&self) -> f64 {
        self.kappa * self.gamma / (self.gamma - 1.0)
    }

    fn primitives(&self, u: &State<2>, sigma: f64) -> Result<(f64, f64)> {
        let [m, q] = *u;
        if !(m > 0.0) || !(sigma > 0.0) || !q.is_finite() {
            return Err(Error::Nonphysical(format!(
                "nozzle state sigma*rho = {m}, q = {q}, sigma = {sigma}"
            )));
        }
        Ok((m / sigma, q / m))
    }

    /// `kappa*gamma/(gamma-1) * rho^(gamma-1)`, evaluated as a single power
    /// so that its floating-point values are as finely spaced as possible.
    pub fn enthalpy(&self, rho: f64) -> f64 {
        (self.enthalpy_factor().powf(1.0 / (self.gamma - 1.0)) * rho).powf(self.gamma - 1.0)
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        self.kappa * rho.powf(self.gamma)
    }

    pub fn sound_speed(&self, rho: f64) -> f64 {
        (self.kappa * self.gamma).sqrt() * rho.powf(0.5 * (self.gamma - 1.0))
    }

    /// Value of `sigma*rho` at which `E(sigma*rho; q)` attains its minimum
    /// (the sonic state).
    pub fn sonic_mass(&self, q: f64, sigma: f64) -> f64 {
        let c = self.enthalpy_factor() * sigma.powf(1.0 - self.gamma);
        (q * q / (c * (self.gamma - 1.0))).powf(1.0 / (self.gamma + 1.0))
    }

    /// Branch of an admissible state.
    pub fn branch_of(&self, u: &State<2>, sigma: f64) -> NozzleBranch {
        if u[0] >= self.sonic_mass(u[1], sigma) {
            NozzleBranch::Subsonic
        } else {
            NozzleBranch::Supersonic
        }
    }

    /// Solves `E = q^2/(2 m^2) + kappa*gamma/(gamma-1) sigma^(1-gamma) m^(gamma-1)`
    /// for `m = sigma*rho` on the requested branch. `start` seeds the
    /// Newton iteration when it lies inside the branch bracket.
    pub fn solve_mass(
        &self,
        q: f64,
        energy: f64,
        sigma: f64,
        branch: NozzleBranch,
        start: Option<f64>,
    ) -> Result<f64> {
        if !(sigma > 0.0) || !q.is_finite() || !energy.is_finite() {
            return Err(Error::Nonphysical(format!(
                "equilibrium data q = {q}, E = {energy}, sigma = {sigma}"
            )));
        }
        let gm1 = self.gamma - 1.0;
        let c = self.enthalpy_factor() * sigma.powf(1.0 - self.gamma);
        let residual = |m: f64| {
            let r = q * q / (2.0 * m * m) + c * m.powf(gm1) - energy;
            let d = -q * q / (m * m * m) + c * gm1 * m.powf(gm1 - 1.0);
            (r, d)
        };
        let tol = 1e-12f64.max(64.0 * f64::EPSILON * energy.abs());
        if energy <= 0.0 {
            return Err(Error::NoRoot {
                detail: format!("E = {energy} admits no positive density"),
                residual: -energy,
            });
        }
        let potential_root = (energy / c).powf(1.0 / gm1);
        if q == 0.0 {
            return Ok(potential_root);
        }
        let sonic = self.sonic_mass(q, sigma);
        let (floor, _) = residual(sonic);
        if floor > 0.0 {
            return Err(Error::NoRoot {
                detail: format!(
                    "E = {energy} below the sonic minimum for q = {q}, sigma = {sigma}"
                ),
                residual: floor,
            });
        }
        if floor == 0.0 {
            return Ok(sonic);
        }
        let (lo, hi) = match branch {
            NozzleBranch::Subsonic => (sonic, potential_root.max(sonic)),
            NozzleBranch::Supersonic => ((q.abs() / (2.0 * energy).sqrt()).min(sonic), sonic),
        };
        let start = start.unwrap_or(0.5 * (lo + hi));
        bracketed_newton(residual, lo, hi, start, tol)
    }
}

impl SystemModel<2> for Nozzle {
    fn name(&self) -> &'static str {
        "nozzle"
    }

    fn component_names(&self) -> [&'static str; 2] {
        ["sigma_rho", "q"]
    }

    fn equilibrium_names(&self) -> [&'static str; 2] {
        ["q", "E"]
    }

    fn geometry_name(&self) -> &'static str {
        "sigma"
    }

    fn geometry(&self, x: f64) -> f64 {
        self.sigma.eval(x)
    }

    fn source_components(&self) -> [bool; 2] {
        [false, true]
    }

    fn flux(&self, u: &State<2>, sigma: f64) -> Result<State<2>> {
        let (rho, vel) = self.primitives(u, sigma)?;
        Ok([u[1], u[1] * vel + sigma * self.pressure(rho)])
    }

    fn equilibrium(&self, u: &State<2>, sigma: f64) -> Result<State<2>> {
        let (rho, vel) = self.primitives(u, sigma)?;
        Ok([u[1], 0.5 * vel * vel + self.enthalpy(rho)])
    }

    fn state_from_equilibrium(
        &self,
        eq: &State<2>,
        sigma: f64,
        guess: &State<2>,
    ) -> Result<State<2>> {
        let [q, energy] = *eq;
        let branch = self.branch_of(&[guess[0], q], sigma);
        let m = self.solve_mass(q, energy, sigma, branch, Some(guess[0]))?;
        Ok([m, q])
    }

    fn balance_matrix(&self, u: &State<2>, sigma: f64) -> Result<[[f64; 2]; 2]> {
        let (_, vel) = self.primitives(u, sigma)?;
        Ok([[1.0, 0.0], [vel, u[0]]])
    }

    fn wave_speeds(&self, u: &State<2>, sigma: f64) -> Result<WaveSpeeds> {
        let (rho, vel) = self.primitives(u, sigma)?;
        let c = self.sound_speed(rho);
        Ok(WaveSpeeds {
            min: vel - c,
            max: vel + c,
            bounded: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> Nozzle {
        Nozzle::new(1.0, 1.4, Profile::constant(1.0)).unwrap()
    }

    /// Plain bisection on `[lo, hi]`, independent of the Newton path.
    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let flo = f(lo);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn parameters_are_validated() {
        assert!(Nozzle::new(0.0, 1.4, Profile::constant(1.0)).is_err());
        assert!(Nozzle::new(1.0, 1.0, Profile::constant(1.0)).is_err());
        assert!(Nozzle::new(1.0, 1.7, Profile::constant(1.0)).is_err());
    }

    #[test]
    fn flux_at_rest() {
        let f = model().flux(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!(f, [0.0, 1.0]);
    }

    #[test]
    fn equilibrium_at_rest() {
        let e = model().equilibrium(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!(e[0], 0.0);
        assert!((e[1] - 3.5).abs() < 1e-15);
    }

    #[test]
    fn vacuum_is_rejected() {
        let m = model();
        assert!(matches!(
            m.flux(&[0.0, 1.0], 1.0),
            Err(Error::Nonphysical(_))
        ));
        assert!(m.equilibrium(&[-1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn zero_discharge_closed_form() {
        let m = model();
        let sigma = 1.7;
        let energy = 4.2;
        let got = m
            .state_from_equilibrium(&[0.0, energy], sigma, &[1.0, 0.0])
            .unwrap();
        let closed = sigma * (energy * 0.4 / 1.4).powf(1.0 / 0.4);
        assert!((got[0] - closed).abs() < 1e-12 * closed);
        let oracle = bisect(|x| 3.5 * (x / sigma).powf(0.4) - energy, 1e-9, 1e3);
        assert!((got[0] - oracle).abs() < 1e-10 * oracle);
    }

    #[test]
    fn subsonic_root_matches_bisection() {
        let m = model();
        let q = 8.0;
        let energy = 58.3367745090349;
        let sigma = 0.976 - 0.748 * (-4.0f64).tanh();
        let sonic = m.sonic_mass(q, sigma);
        let c = 3.5 * sigma.powf(-0.4);
        let f = |x: f64| q * q / (2.0 * x * x) + c * x.powf(0.4) - energy;
        let oracle = bisect(f, sonic, 1e6);
        let got = m
            .solve_mass(q, energy, sigma, NozzleBranch::Subsonic, None)
            .unwrap();
        assert!((got - oracle).abs() <= 1e-14 * oracle, "{got} vs {oracle}");
        // rho on this branch
        assert!((got / sigma - 1134.18987395837).abs() < 1e-6);
    }

    #[test]
    fn supersonic_branch_follows_guess() {
        let m = model();
        let sigma = 2.0;
        let u = [2.0 * 0.382246, 8.0];
        assert_eq!(m.branch_of(&u, sigma), NozzleBranch::Supersonic);
        let e = m.equilibrium(&u, sigma).unwrap();
        let back = m.state_from_equilibrium(&e, sigma, &u).unwrap();
        assert!((back[0] - u[0]).abs() < 1e-12 * u[0]);
        assert_eq!(back[1], u[1]);
    }

    #[test]
    fn below_sonic_minimum_has_no_root() {
        let m = model();
        let r = m.solve_mass(8.0, 1.0, 1.0, NozzleBranch::Subsonic, None);
        assert!(matches!(r, Err(Error::NoRoot { .. })));
    }

    #[test]
    fn speeds_closed_form() {
        let s = model().wave_speeds(&[1.0, 0.0], 1.0).unwrap();
        assert!((s.max - 1.4f64.sqrt()).abs() < 1e-15);
        assert!((s.min + 1.4f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn round_trip_on_random_states() {
        let m = model();
        let mut seed = 0x2545f4914f6cdd1du64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..2000 {
            let sigma = 0.2 + 2.0 * next();
            let rho = 0.05 + 50.0 * next();
            let vel = -20.0 + 40.0 * next();
            let u = [sigma * rho, sigma * rho * vel];
            let e = m.equilibrium(&u, sigma).unwrap();
            let back = m.state_from_equilibrium(&e, sigma, &u).unwrap();
            assert!(
                (back[0] - u[0]).abs() <= 1e-12 * u[0].abs().max(1.0),
                "{u:?} -> {back:?}"
            );
            assert_eq!(back[1], u[1]);
            let e2 = m.equilibrium(&back, sigma).unwrap();
            assert!((e2[1] - e[1]).abs() <= 1e-12 * e[1].abs().max(1.0));
        }
    }
}
