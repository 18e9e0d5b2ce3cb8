use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Grid;
use crate::model::State;

/// Per-component discrete L1 and L-infinity distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentNorms {
    pub components: Vec<String>,
    pub l1: Vec<f64>,
    pub linf: Vec<f64>,
}

/// `L1 = dx * sum |a - b|`, `Linf = max |a - b|`, per component, over two
/// interior fields of equal length.
pub fn error_norms<const N: usize>(
    a: &[State<N>],
    b: &[State<N>],
    dx: f64,
    names: [&str; N],
) -> Result<ComponentNorms> {
    if a.len() != b.len() {
        return Err(Error::Usage(format!(
            "cannot compare fields of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut l1 = vec![0.0; N];
    let mut linf = vec![0.0f64; N];
    for (x, y) in a.iter().zip(b) {
        for c in 0..N {
            let d = (x[c] - y[c]).abs();
            l1[c] += d;
            linf[c] = linf[c].max(d);
        }
    }
    for v in &mut l1 {
        *v *= dx;
    }
    Ok(ComponentNorms {
        components: names.iter().map(|s| s.to_string()).collect(),
        l1,
        linf,
    })
}

pub fn l1_distance(a: &[f64], b: &[f64], dx: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Usage(format!(
            "cannot compare fields of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dx * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// One row of a Runge table, labelled by the finest mesh of its triplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungeRow {
    pub dx: f64,
    pub delta12: f64,
    pub delta24: f64,
    /// `delta12^2 / |delta12 - delta24|`; `None` when the two coincide.
    pub error: Option<f64>,
    /// `log2(delta24 / delta12)`; `None` when either is zero.
    pub rate: Option<f64>,
}

pub fn runge_row(dx: f64, delta12: f64, delta24: f64) -> RungeRow {
    let gap = (delta12 - delta24).abs();
    let error = (gap > 0.0).then(|| delta12 * delta12 / gap);
    let rate = (delta12 > 0.0 && delta24 > 0.0).then(|| (delta24 / delta12).log2());
    RungeRow {
        dx,
        delta12,
        delta24,
        error,
        rate,
    }
}

/// How a field on mesh `dx` is carried to the nested mesh `2 dx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Restriction {
    /// Mean of the two fine values (cell averages).
    PairAverage,
    /// Sixth-order midpoint interpolation of point values, periodic wrap.
    PeriodicMidpoint,
}

pub fn restrict_by_two(fine: &[f64], how: Restriction) -> Result<Vec<f64>> {
    if fine.len() % 2 != 0 || fine.is_empty() {
        return Err(Error::Usage(format!(
            "cannot halve a field of length {}",
            fine.len()
        )));
    }
    let n = fine.len();
    Ok(match how {
        Restriction::PairAverage => fine.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect(),
        Restriction::PeriodicMidpoint => {
            const W: [f64; 6] = [3.0, -25.0, 150.0, 150.0, -25.0, 3.0];
            if n < 6 {
                return Err(Error::Usage("midpoint interpolation needs 6 nodes".into()));
            }
            (0..n / 2)
                .map(|k| {
                    let base = 2 * k + n - 2;
                    W.iter()
                        .enumerate()
                        .map(|(s, w)| w * fine[(base + s) % n])
                        .sum::<f64>()
                        / 256.0
                })
                .collect()
        }
    })
}

/// Runge table from solutions on meshes `dx_0, dx_0/2, dx_0/4, ...`
/// (coarsest first). Row `k` uses meshes `k, k+1, k+2` and is labelled by
/// the finest of them; norms are taken on the coarser mesh of each pair.
pub fn runge_table(dx0: f64, fields: &[Vec<f64>], how: Restriction) -> Result<Vec<RungeRow>> {
    let mut deltas = Vec::new();
    for k in 1..fields.len() {
        let coarse_dx = dx0 / (1u64 << (k - 1)) as f64;
        let restricted = restrict_by_two(&fields[k], how)?;
        deltas.push(l1_distance(&restricted, &fields[k - 1], coarse_dx)?);
    }
    Ok(deltas
        .windows(2)
        .enumerate()
        .map(|(k, d)| runge_row(dx0 / (1u64 << (k + 2)) as f64, d[1], d[0]))
        .collect())
}

/// Linear interpolation of a fine interior field to the interior centres of
/// a coarse grid covering the same interval.
pub fn sample_linear(fine_grid: &Grid, fine: &[f64], coarse_grid: &Grid) -> Result<Vec<f64>> {
    if fine.len() != fine_grid.n_cells() {
        return Err(Error::Usage(format!(
            "field of length {} on a grid of {} cells",
            fine.len(),
            fine_grid.n_cells()
        )));
    }
    let n = fine.len();
    let first = fine_grid.center(1);
    Ok(coarse_grid
        .interior_centers()
        .iter()
        .map(|&x| {
            let s = ((x - first) / fine_grid.dx()).clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n.saturating_sub(2));
            let w = s - i as f64;
            if n == 1 {
                fine[0]
            } else {
                (1.0 - w) * fine[i] + w * fine[i + 1]
            }
        })
        .collect())
}
