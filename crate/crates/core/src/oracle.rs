//! Independent reference paths for the transmission, seeded synthetic maps,
//! and passivity diagnostics.
//!
//! The two S21 oracles assemble their own matrices from the mode list and do
//! not touch [`crate::linalg`] or the Hamiltonian builder in [`crate::model`]:
//!
//! * [`s21_sum_oracle`] solves the steady-state mode amplitudes
//!   `(w - H) b = sqrt(beta) p_in` by Gauss-Jordan elimination with full
//!   pivoting and evaluates `S21 = (2 / i) sum_j sqrt(beta_j) b_j / p_in`.
//! * [`s21_cramer_oracle`] evaluates `B^T adj(M) B / det(M)` for three modes.
//!
//! Synthetic noise uses ChaCha8 with one stream per grid point (stream index
//! = row-major grid index, word position 0) and standard normals drawn by the
//! ziggurat sampler of `rand_distr`, real part first. The map is therefore
//! identical however the grid is traversed.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{assemble_hamiltonian, HybridSystem, Transmission};
use crate::sweep::{compute_map, SpectrumMap, SystemTemplate};

/// Relative pivot / determinant size below which the oracles report a singular solve.
const ORACLE_SINGULAR: f64 = 1e-14;

/// Transmission from the steady-state mode amplitudes.
pub fn s21_sum_oracle(system: &HybridSystem, omega: f64) -> Result<Complex64> {
    system.validate()?;
    let modes = system.modes();
    let n = modes.len();
    let sqrt_beta: Vec<f64> = modes.iter().map(|m| m.beta.sqrt()).collect();
    if sqrt_beta.iter().all(|&b| b == 0.0) {
        return Ok(Complex64::new(0.0, 0.0));
    }

    // Equation of motion per mode j, frequency domain:
    // (w - w_j + i(a_j + b_j)) b_j - sum_k (g_jk - i sqrt(b_j b_k)) b_k = sqrt(b_j) p_in
    let mut a = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    let mut rhs: Vec<Complex64> = sqrt_beta.iter().map(|&b| Complex64::new(b, 0.0)).collect();
    for j in 0..n {
        for k in 0..n {
            a[j][k] = if j == k {
                Complex64::new(omega - modes[j].omega, modes[j].alpha + modes[j].beta)
            } else {
                -Complex64::new(system.couplings().get(j, k), -sqrt_beta[j] * sqrt_beta[k])
            };
        }
    }
    let scale = a.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);

    // Gauss-Jordan with full pivoting.
    let mut col_of: Vec<usize> = (0..n).collect();
    for step in 0..n {
        let (mut pr, mut pc, mut pmax) = (step, step, -1.0);
        for r in step..n {
            for c in step..n {
                let v = a[r][c].norm();
                if v > pmax {
                    (pr, pc, pmax) = (r, c, v);
                }
            }
        }
        if !(pmax > ORACLE_SINGULAR * scale) {
            return Err(Error::SingularResponse {
                condition: scale / pmax.max(f64::MIN_POSITIVE),
            });
        }
        a.swap(step, pr);
        rhs.swap(step, pr);
        if pc != step {
            for row in a.iter_mut() {
                row.swap(step, pc);
            }
            col_of.swap(step, pc);
        }
        let pivot = a[step][step];
        for c in 0..n {
            a[step][c] /= pivot;
        }
        rhs[step] /= pivot;
        for r in 0..n {
            if r != step {
                let f = a[r][step];
                if f != Complex64::new(0.0, 0.0) {
                    for c in 0..n {
                        let v = a[step][c];
                        a[r][c] -= f * v;
                    }
                    let v = rhs[step];
                    rhs[r] -= f * v;
                }
            }
        }
    }
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); n];
    for (pos, &mode) in col_of.iter().enumerate() {
        amplitudes[mode] = rhs[pos];
    }
    let weighted: Complex64 = sqrt_beta.iter().zip(&amplitudes).map(|(s, b)| b * s).sum();
    Ok(Complex64::new(2.0, 0.0) / Complex64::i() * weighted)
}

/// Transmission of a three-mode system by the adjugate formula.
pub fn s21_cramer_oracle(system: &HybridSystem, omega: f64) -> Result<Complex64> {
    system.validate()?;
    let modes = system.modes();
    if modes.len() != 3 {
        return Err(Error::InvalidSystem(format!(
            "adjugate oracle needs 3 modes, got {}",
            modes.len()
        )));
    }
    let b: [f64; 3] = std::array::from_fn(|j| (2.0 * modes[j].beta).sqrt());
    if b.iter().all(|&x| x == 0.0) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let i = Complex64::i();
    // M = i (w I - H), entrywise.
    let m: [[Complex64; 3]; 3] = std::array::from_fn(|r| {
        std::array::from_fn(|c| {
            if r == c {
                i * Complex64::new(omega - modes[r].omega, modes[r].alpha + modes[r].beta)
            } else {
                let beta_rc = (modes[r].beta * modes[c].beta).sqrt();
                -i * Complex64::new(system.couplings().get(r, c), -beta_rc)
            }
        })
    });
    let cof = |r: usize, c: usize| {
        let rows: Vec<usize> = (0..3).filter(|&x| x != r).collect();
        let cols: Vec<usize> = (0..3).filter(|&x| x != c).collect();
        let minor =
            m[rows[0]][cols[0]] * m[rows[1]][cols[1]] - m[rows[0]][cols[1]] * m[rows[1]][cols[0]];
        if (r + c) % 2 == 0 {
            minor
        } else {
            -minor
        }
    };
    let det = m[0][0] * cof(0, 0) + m[0][1] * cof(0, 1) + m[0][2] * cof(0, 2);
    let hadamard: f64 = m
        .iter()
        .map(|row| row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .product();
    if !(det.norm() > ORACLE_SINGULAR * hadamard) {
        return Err(Error::SingularResponse {
            condition: hadamard / det.norm().max(f64::MIN_POSITIVE),
        });
    }
    // adj(M)[r][c] = cofactor(c, r)
    let mut num = Complex64::new(0.0, 0.0);
    for r in 0..3 {
        for c in 0..3 {
            num += b[r] * cof(c, r) * b[c];
        }
    }
    Ok(num / det)
}

/// Additive complex Gaussian noise, independent on real and imaginary parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise sigma {sigma}")));
        }
        Ok(NoiseSpec { sigma, seed })
    }

    /// The noise sample at row-major grid index `index`.
    pub fn sample(&self, index: u64) -> Complex64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(self.sigma * re, self.sigma * im)
    }

    /// Adds noise to every point of `map` in place.
    pub fn apply(&self, map: &mut SpectrumMap) {
        if self.sigma == 0.0 {
            return;
        }
        for (k, z) in map.values_mut().iter_mut().enumerate() {
            *z += self.sample(k as u64);
        }
    }
}

/// A noisy forward-model map.
pub fn synth_map(
    template: &SystemTemplate,
    fields: &[f64],
    freqs: &[f64],
    noise: &NoiseSpec,
) -> Result<SpectrumMap> {
    NoiseSpec::new(noise.sigma, noise.seed)?;
    let mut map = compute_map(template, fields, freqs)?;
    noise.apply(&mut map);
    Ok(map)
}

/// Violations beyond this are flagged by [`passivity_check`].
pub const PASSIVITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PassivityReport {
    /// Largest imaginary part over the Hamiltonian's eigenvalues.
    pub max_im_eigenvalue: f64,
    /// Largest `|1 + S21|` over the sampled frequencies.
    pub max_transmission: f64,
    /// Samples skipped because the response matrix was singular.
    pub singular_samples: usize,
    pub growing_mode: bool,
    pub gain: bool,
}

impl PassivityReport {
    pub fn is_passive(&self) -> bool {
        !(self.growing_mode || self.gain)
    }
}

/// Checks the spectrum and transmission for signs of gain. Accepts systems
/// built with [`HybridSystem::new_unchecked`]; never fails.
pub fn passivity_check(system: &HybridSystem, omegas: &[f64]) -> PassivityReport {
    let eigen = assemble_hamiltonian(system).eigenvalues();
    let max_im_eigenvalue = match &eigen {
        Ok(ev) => ev.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max),
        Err(_) => f64::NAN,
    };
    let tx = Transmission::new(system);
    let mut max_transmission: f64 = 0.0;
    let mut singular_samples = 0;
    for &w in omegas {
        match tx.at(w) {
            Ok(s) => max_transmission = max_transmission.max((1.0 + s).norm()),
            Err(_) => singular_samples += 1,
        }
    }
    PassivityReport {
        max_im_eigenvalue,
        max_transmission,
        singular_samples,
        growing_mode: !(max_im_eigenvalue <= PASSIVITY_TOLERANCE),
        gain: !(max_transmission <= 1.0 + PASSIVITY_TOLERANCE),
    }
}
