use crate::error::{Error, Result};

use super::{Profile, State, SystemModel, WaveSpeeds};

/// Two-layer shallow water equations with density ratio `r = rho1/rho2 < 1`.
///
/// Evolved components: `(h1, q1, h2, q2)` (upper layer first); equilibrium
/// variables: `(q1, E1, q2, E2)` with
/// `E1 = q1^2/(2 h1^2) + g (h1 + h2 + Z)` and
/// `E2 = q2^2/(2 h2^2) + g (r h1 + h2 + Z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayer {
    g: f64,
    r: f64,
    bottom: Profile,
}

const NEWTON_CAP: usize = 50;
const BISECTION_CAP: usize = 200;
/// Relative size of an imaginary eigenvalue part that counts as a loss of
/// hyperbolicity.
const IMAGINARY_TOL: f64 = 1e-10;

impl TwoLayer {
    pub fn new(g: f64, r: f64, bottom: Profile) -> Result<Self> {
        if !(g > 0.0) {
            return Err(Error::Parameter(format!("g must be positive, got {g}")));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Parameter(format!("r must lie in (0, 1), got {r}")));
        }
        bottom.validate()?;
        Ok(Self { g, r, bottom })
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn bottom(&self) -> &Profile {
        &self.bottom
    }

    fn depths(&self, u: &State<4>) -> Result<(f64, f64)> {
        let [h1, q1, h2, q2] = *u;
        if !(h1 > 0.0 && h2 > 0.0) || !q1.is_finite() || !q2.is_finite() {
            return Err(Error::Nonphysical(format!(
                "two-layer state h1 = {h1}, q1 = {q1}, h2 = {h2}, q2 = {q2}"
            )));
        }
        Ok((h1, h2))
    }

    fn energy_residual(&self, eq: &State<4>, z: f64, h1: f64, h2: f64) -> [f64; 2] {
        let [q1, e1, q2, e2] = *eq;
        let g = self.g;
        [
            q1 * q1 / (2.0 * h1 * h1) + g * (h1 + h2 + z) - e1,
            q2 * q2 / (2.0 * h2 * h2) + g * (self.r * h1 + h2 + z) - e2,
        ]
    }

    fn residual_tol(eq: &State<4>) -> f64 {
        1e-12f64.max(64.0 * f64::EPSILON * eq[1].abs().max(eq[3].abs()))
    }

    /// Damped Newton on the 2x2 system for `(h1, h2)`.
    fn newton_depths(&self, eq: &State<4>, z: f64, start: (f64, f64)) -> Option<(f64, f64)> {
        let [q1, _, q2, _] = *eq;
        let g = self.g;
        let tol = Self::residual_tol(eq);
        let (mut h1, mut h2) = start;
        let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());
        let mut res = self.energy_residual(eq, z, h1, h2);
        for _ in 0..NEWTON_CAP {
            let j11 = g - q1 * q1 / (h1 * h1 * h1);
            let j12 = g;
            let j21 = g * self.r;
            let j22 = g - q2 * q2 / (h2 * h2 * h2);
            let det = j11 * j22 - j12 * j21;
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let d1 = (res[0] * j22 - res[1] * j12) / det;
            let d2 = (res[1] * j11 - res[0] * j21) / det;
            if norm(res) <= tol {
                // polish once
                let (p1, p2) = (h1 - d1, h2 - d2);
                if p1 > 0.0 && p2 > 0.0 {
                    let rp = self.energy_residual(eq, z, p1, p2);
                    if norm(rp) < norm(res) {
                        return Some((p1, p2));
                    }
                }
                return Some((h1, h2));
            }
            let mut lambda = 1.0;
            loop {
                let (n1, n2) = (h1 - lambda * d1, h2 - lambda * d2);
                if n1 > 0.0 && n2 > 0.0 {
                    let rn = self.energy_residual(eq, z, n1, n2);
                    if norm(rn) < norm(res) || lambda < 1e-3 {
                        h1 = n1;
                        h2 = n2;
                        res = rn;
                        break;
                    }
                }
                lambda *= 0.5;
                if lambda < 1e-6 {
                    return None;
                }
            }
        }
        None
    }

    /// Fallback: eliminate `h2` through the first equation and bisect the
    /// remaining scalar equation on the sign change closest to `start.0`.
    ///
    /// Where `h2(h1)` reaches zero with `q2 != 0` the scalar residual tends to
    /// `+inf`, so admissibility boundaries count as sign-carrying samples.
    fn bisect_depths(&self, eq: &State<4>, z: f64, start: (f64, f64)) -> Result<(f64, f64)> {
        let [q1, e1, q2, e2] = *eq;
        let g = self.g;
        let h2_of = |h1: f64| (e1 - q1 * q1 / (2.0 * h1 * h1)) / g - h1 - z;
        let phi = |h1: f64| {
            let h2 = h2_of(h1);
            q2 * q2 / (2.0 * h2 * h2) + g * (self.r * h1 + h2 + z) - e2
        };
        let h1_max = e1 / g - z;
        let no_root = |detail: String| Error::NoRoot {
            detail,
            residual: self
                .energy_residual(eq, z, start.0, start.1)
                .iter()
                .fold(0.0, |a: f64, b| a.max(b.abs())),
        };
        if !(h1_max > 0.0) {
            return Err(no_root(format!(
                "E1 = {e1} leaves no admissible upper-layer depth (Z = {z})"
            )));
        }
        // first admissible point of (invalid, valid)
        let boundary = |mut bad: f64, mut good: f64| {
            for _ in 0..BISECTION_CAP {
                let mid = 0.5 * (bad + good);
                if mid == bad || mid == good {
                    break;
                }
                if h2_of(mid) > 0.0 {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            good
        };
        let edge_sign = |h1: f64| if q2 != 0.0 { 1.0 } else { phi(h1).signum() };

        // geometric sampling resolves thin layers as well as deep ones
        const SAMPLES: usize = 4000;
        let lo_sample = h1_max * 1e-8;
        let ratio = (h1_max / lo_sample).powf(1.0 / (SAMPLES - 1) as f64);
        let mut best: Option<(f64, f64)> = None;
        let mut consider = |a: f64, b: f64| {
            let mid = 0.5 * (a + b);
            if best.map_or(true, |(p, q)| {
                (mid - start.0).abs() < (0.5 * (p + q) - start.0).abs()
            }) {
                best = Some((a, b));
            }
        };
        let mut prev = lo_sample;
        for k in 1..SAMPLES {
            let x = if k == SAMPLES - 1 {
                h1_max
            } else {
                lo_sample * ratio.powi(k as i32)
            };
            let (va, vb) = (h2_of(prev) > 0.0, h2_of(x) > 0.0);
            match (va, vb) {
                (true, true) => {
                    if phi(prev).signum() != phi(x).signum() {
                        consider(prev, x);
                    }
                }
                (false, true) => {
                    let c = boundary(prev, x);
                    if c < x && edge_sign(c) != phi(x).signum() {
                        consider(c, x);
                    }
                }
                (true, false) => {
                    let c = boundary(x, prev);
                    if c > prev && edge_sign(c) != phi(prev).signum() {
                        consider(prev, c);
                    }
                }
                (false, false) => {}
            }
            prev = x;
        }
        let (mut lo, mut hi) = best.ok_or_else(|| {
            no_root(format!(
                "no (h1, h2) reproduces E = ({e1}, {e2}) at Z = {z}"
            ))
        })?;
        let lo_positive = phi(lo) > 0.0;
        for _ in 0..BISECTION_CAP {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if (phi(mid) > 0.0) == lo_positive {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h1 = 0.5 * (lo + hi);
        let h2 = h2_of(h1);
        // finish with Newton from the bracketed point for full accuracy
        Ok(self.newton_depths(eq, z, (h1, h2)).unwrap_or((h1, h2)))
    }

    /// Extreme real roots of the characteristic polynomial
    /// `((l-u1)^2 - g h1)((l-u2)^2 - g h2) - r g^2 h1 h2`.
    fn quartic_extremes(&self, u1: f64, u2: f64, h1: f64, h2: f64) -> Option<(f64, f64)> {
        let g = self.g;
        let c1 = g * h1;
        let c2 = g * h2;
        let coupling = self.r * c1 * c2;
        let eval = |l: f64| {
            let a = l - u1;
            let b = l - u2;
            let d1 = a * a - c1;
            let d2 = b * b - c2;
            (d1 * d2 - coupling, 2.0 * a * d2 + 2.0 * b * d1)
        };
        let reach = (c1 + c2).sqrt();
        let scale = u1.abs().max(u2.abs()) + reach;
        let newton = |mut l: f64, upward: bool| -> Option<f64> {
            for _ in 0..100 {
                let (p, dp) = eval(l);
                if p == 0.0 {
                    return Some(l);
                }
                if dp == 0.0 {
                    return None;
                }
                let step = p / dp;
                // from outside the root set the iteration is monotone, so a
                // reversal is either round-off or a sign of complex roots
                if (step < 0.0) == upward {
                    return (step.abs() <= 1e-8 * scale).then_some(l);
                }
                l -= step;
                if step.abs() <= 4.0 * f64::EPSILON * scale {
                    return Some(l);
                }
            }
            None
        };
        let lmax = newton(u1.max(u2) + reach, true)?;
        let lmin = newton(u1.min(u2) - reach, false)?;

        // deflate to the inner quadratic and check its discriminant
        let (b1, k1) = (-2.0 * u1, u1 * u1 - c1);
        let (b2, k2) = (-2.0 * u2, u2 * u2 - c2);
        let a3 = b1 + b2;
        let a2 = k1 + k2 + b1 * b2;
        let p = -(lmax + lmin);
        let s = lmax * lmin;
        let bq = a3 - p;
        let cq = a2 - s - p * bq;
        let disc = bq * bq - 4.0 * cq;
        if disc < 0.0 && 0.5 * (-disc).sqrt() > IMAGINARY_TOL * scale {
            return None;
        }
        Some((lmin, lmax))
    }
}

impl SystemModel<4> for TwoLayer {
    fn name(&self) -> &'static str {
        "two_layer"
    }

    fn component_names(&self) -> [&'static str; 4] {
        ["h1", "q1", "h2", "q2"]
    }

    fn equilibrium_names(&self) -> [&'static str; 4] {
        ["q1", "E1", "q2", "E2"]
    }

    fn geometry_name(&self) -> &'static str {
        "Z"
    }

    fn geometry(&self, x: f64) -> f64 {
        self.bottom.eval(x)
    }

    fn source_components(&self) -> [bool; 4] {
        [false, true, false, true]
    }

    fn flux(&self, u: &State<4>, _z: f64) -> Result<State<4>> {
        let (h1, h2) = self.depths(u)?;
        let [_, q1, _, q2] = *u;
        let half_g = 0.5 * self.g;
        Ok([
            q1,
            q1 * q1 / h1 + half_g * h1 * h1,
            q2,
            q2 * q2 / h2 + half_g * h2 * h2,
        ])
    }

    fn equilibrium(&self, u: &State<4>, z: f64) -> Result<State<4>> {
        let (h1, h2) = self.depths(u)?;
        let [_, q1, _, q2] = *u;
        let g = self.g;
        Ok([
            q1,
            q1 * q1 / (2.0 * h1 * h1) + g * (h1 + h2 + z),
            q2,
            q2 * q2 / (2.0 * h2 * h2) + g * (self.r * h1 + h2 + z),
        ])
    }

    fn state_from_equilibrium(&self, eq: &State<4>, z: f64, guess: &State<4>) -> Result<State<4>> {
        if eq.iter().any(|v| !v.is_finite()) || !z.is_finite() {
            return Err(Error::Nonphysical(format!(
                "equilibrium data {eq:?}, Z = {z}"
            )));
        }
        let start = if guess[0] > 0.0 && guess[2] > 0.0 {
            (guess[0], guess[2])
        } else {
            (1.0, 1.0)
        };
        let (h1, h2) = match self.newton_depths(eq, z, start) {
            Some(h) => h,
            None => self.bisect_depths(eq, z, start)?,
        };
        Ok([h1, eq[0], h2, eq[2]])
    }

    fn balance_matrix(&self, u: &State<4>, _z: f64) -> Result<[[f64; 4]; 4]> {
        let (h1, h2) = self.depths(u)?;
        let u1 = u[1] / h1;
        let u2 = u[3] / h2;
        Ok([
            [1.0, 0.0, 0.0, 0.0],
            [u1, h1, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, u2, h2],
        ])
    }

    fn wave_speeds(&self, u: &State<4>, _z: f64) -> Result<WaveSpeeds> {
        let (h1, h2) = self.depths(u)?;
        let u1 = u[1] / h1;
        let u2 = u[3] / h2;
        Ok(match self.quartic_extremes(u1, u2, h1, h2) {
            Some((min, max)) => WaveSpeeds {
                min,
                max,
                bounded: false,
            },
            None => {
                let reach = (self.g * (h1 + h2)).sqrt();
                WaveSpeeds {
                    min: u1.min(u2) - reach,
                    max: u1.max(u2) + reach,
                    bounded: true,
                }
            }
        })
    }
}
