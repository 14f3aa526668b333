use std::io::{self, Write};

/// Per-vertex mismatch between target and achieved masses.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// `|nu_i - omega_i|`.
    pub rho: Vec<f64>,
    /// `nu_i / omega_i`; `None` where the cell is empty.
    pub psi: Vec<Option<f64>>,
    pub nu: Vec<f64>,
    pub omega: Vec<f64>,
}

impl Diagnostics {
    pub fn new(nu: &[f64], omega: &[f64]) -> Self {
        assert_eq!(nu.len(), omega.len(), "measure lengths differ");
        let rho = nu.iter().zip(omega).map(|(a, b)| (a - b).abs()).collect();
        let psi = nu.iter().zip(omega).map(|(a, &b)| (b > 0.0).then(|| a / b)).collect();
        Self { rho, psi, nu: nu.to_vec(), omega: omega.to_vec() }
    }

    pub fn rho_max(&self) -> f64 {
        self.rho.iter().fold(0.0, |m, &r| m.max(r))
    }

    pub fn rho_mean(&self) -> f64 {
        if self.rho.is_empty() {
            return 0.0;
        }
        self.rho.iter().sum::<f64>() / self.rho.len() as f64
    }

    /// Min, max and mean of the defined `psi` values.
    pub fn psi_range(&self) -> Option<(f64, f64, f64)> {
        let vals: Vec<f64> = self.psi.iter().flatten().copied().collect();
        if vals.is_empty() {
            return None;
        }
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((lo, hi, vals.iter().sum::<f64>() / vals.len() as f64))
    }

    pub fn empty_cells(&self) -> usize {
        self.psi.iter().filter(|p| p.is_none()).count()
    }
}

/// Equal-width histogram over `[min, max]` of the finite values, as
/// `(lo, hi, count)` rows. The last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let vals: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if vals.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in vals {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts.into_iter().enumerate().map(|(b, c)| (lo + b as f64 * width, lo + (b + 1) as f64 * width, c)).collect()
}

/// Writes `vertex,nu,omega,rho,psi` rows; undefined `psi` is written as `nan`.
pub fn write_diagnostics_csv<W: Write>(d: &Diagnostics, mut w: W) -> io::Result<()> {
    writeln!(w, "vertex,nu,omega,rho,psi")?;
    for i in 0..d.rho.len() {
        let psi = d.psi[i].map_or("nan".to_string(), |p| format!("{p:e}"));
        writeln!(w, "{i},{:e},{:e},{:e},{psi}", d.nu[i], d.omega[i], d.rho[i])?;
    }
    Ok(())
}
