//! Coupled-mode model of damped oscillators sharing a stripline.
//!
//! Each mode `j` has a resonance `omega_j`, an intrinsic loss `alpha_j` and an
//! extrinsic loss `beta_j` through the stripline. Coherent couplings `g_jk` are
//! real. The effective (non-Hermitian, complex-symmetric) Hamiltonian is
//!
//! ```text
//! H_jj = omega_j - i (alpha_j + beta_j)
//! H_jk = g_jk - i sqrt(beta_j beta_k)        (j != k)
//! ```
//!
//! and the transmission is `S21(w) = B^T M^-1 B` with `M = i (w I - H)` and
//! `B = sqrt(2) (sqrt(beta_1), ..., sqrt(beta_N))^T`. With this convention
//! `1 + S21` is the through-line transmission, so `|1 + S21| <= 1` for any
//! passive parameter set.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::ComplexSquareMatrix;

/// Extrinsic damping from a stripline coupling amplitude, `beta = 2 pi lambda^2`.
pub fn lambda_to_beta(lambda: f64) -> f64 {
    TAU * lambda * lambda
}

/// One damped oscillator.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSpec {
    pub label: String,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ModeSpec {
    pub fn new(label: impl Into<String>, omega: f64, alpha: f64, beta: f64) -> Self {
        ModeSpec {
            label: label.into(),
            omega,
            alpha,
            beta,
        }
    }

    /// Complex frequency including both loss channels, `omega - i (alpha + beta)`.
    pub fn loaded_frequency(&self) -> Complex64 {
        Complex64::new(self.omega, -(self.alpha + self.beta))
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.omega.is_finite() && self.alpha.is_finite() && self.beta.is_finite();
        if !finite {
            return Err(Error::InvalidSystem(format!(
                "mode '{}' has non-finite parameters",
                self.label
            )));
        }
        if self.omega < 0.0 || self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::InvalidSystem(format!(
                "mode '{}' needs omega, alpha, beta >= 0 (got {}, {}, {})",
                self.label, self.omega, self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Symmetric table of real coherent couplings with a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct Couplings {
    n: usize,
    values: Vec<f64>,
}

impl Couplings {
    pub fn new(n: usize) -> Self {
        Couplings {
            n,
            values: vec![0.0; n * n],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Sets `g(i, j) = g(j, i) = g`.
    pub fn set(&mut self, i: usize, j: usize, g: f64) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::InvalidSystem(format!(
                "coupling ({i}, {j}) out of range for {} modes",
                self.n
            )));
        }
        if i == j {
            return Err(Error::InvalidSystem(format!("self-coupling ({i}, {i})")));
        }
        if !g.is_finite() {
            return Err(Error::InvalidSystem(format!("coupling ({i}, {j}) = {g}")));
        }
        self.values[i * self.n + j] = g;
        self.values[j * self.n + i] = g;
        Ok(())
    }

    pub fn with(mut self, i: usize, j: usize, g: f64) -> Result<Self> {
        self.set(i, j, g)?;
        Ok(self)
    }

    /// Nonzero upper-triangle entries `(i, j, g)` with `i < j`.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            ((i + 1)..self.n).filter_map(move |j| {
                let g = self.get(i, j);
                (g != 0.0).then_some((i, j, g))
            })
        })
    }

    /// Reorders modes: entry `(new_i, new_j)` takes `(order[new_i], order[new_j])`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut out = Couplings::new(self.n);
        for (a, &i) in order.iter().enumerate() {
            for (b, &j) in order.iter().enumerate() {
                out.values[a * self.n + b] = self.get(i, j);
            }
        }
        out
    }
}

/// An ordered set of modes plus their coherent couplings.
///
/// The canonical three-mode layout is `[magnon 1, resonator, magnon 2]`, with
/// no direct magnon-magnon coupling.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridSystem {
    modes: Vec<ModeSpec>,
    couplings: Couplings,
}

impl HybridSystem {
    pub fn new(modes: Vec<ModeSpec>, couplings: Couplings) -> Result<Self> {
        let system = Self::new_unchecked(modes, couplings);
        system.validate()?;
        Ok(system)
    }

    /// Skips validation. Only diagnostics (e.g. passivity checks on
    /// deliberately unphysical inputs) should need this.
    pub fn new_unchecked(modes: Vec<ModeSpec>, couplings: Couplings) -> Self {
        HybridSystem { modes, couplings }
    }

    /// `[magnon1, resonator, magnon2]` with `g1` between magnon1 and the
    /// resonator and `g2` between the resonator and magnon2.
    pub fn canonical(
        magnon1: ModeSpec,
        resonator: ModeSpec,
        magnon2: ModeSpec,
        g1: f64,
        g2: f64,
    ) -> Result<Self> {
        let couplings = Couplings::new(3).with(0, 1, g1)?.with(1, 2, g2)?;
        Self::new(vec![magnon1, resonator, magnon2], couplings)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::InvalidSystem("no modes".into()));
        }
        if self.couplings.len() != self.modes.len() {
            return Err(Error::InvalidSystem(format!(
                "coupling table is {0}x{0} for {1} modes",
                self.couplings.len(),
                self.modes.len()
            )));
        }
        for m in &self.modes {
            m.validate()?;
        }
        let n = self.modes.len();
        for i in 0..n {
            if self.couplings.get(i, i) != 0.0 {
                return Err(Error::InvalidSystem(format!("self-coupling on mode {i}")));
            }
            for j in 0..n {
                let g = self.couplings.get(i, j);
                if !g.is_finite() || g != self.couplings.get(j, i) {
                    return Err(Error::InvalidSystem(format!(
                        "coupling ({i}, {j}) must be finite and symmetric"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn modes_mut(&mut self) -> &mut [ModeSpec] {
        &mut self.modes
    }

    pub fn couplings(&self) -> &Couplings {
        &self.couplings
    }

    pub fn couplings_mut(&mut self) -> &mut Couplings {
        &mut self.couplings
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.modes.iter().position(|m| m.label == label)
    }

    /// The same physical system with modes listed in `order`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        HybridSystem {
            modes: order.iter().map(|&i| self.modes[i].clone()).collect(),
            couplings: self.couplings.permuted(order),
        }
    }

    /// Stripline coupling vector `B = sqrt(2) sqrt(beta)`.
    pub fn port_vector(&self) -> Vec<Complex64> {
        self.modes
            .iter()
            .map(|m| Complex64::new((2.0 * m.beta).sqrt(), 0.0))
            .collect()
    }
}

/// The effective coupling Hamiltonian of `system`.
pub fn build_coupling_hamiltonian(system: &HybridSystem) -> Result<ComplexSquareMatrix> {
    system.validate()?;
    Ok(assemble_hamiltonian(system))
}

pub(crate) fn assemble_hamiltonian(system: &HybridSystem) -> ComplexSquareMatrix {
    let n = system.len();
    let modes = system.modes();
    let mut h = ComplexSquareMatrix::zeros(n);
    for j in 0..n {
        h[(j, j)] = modes[j].loaded_frequency();
        for k in 0..n {
            if k != j {
                let dissipative = (modes[j].beta * modes[k].beta).sqrt();
                h[(j, k)] = Complex64::new(system.couplings().get(j, k), -dissipative);
            }
        }
    }
    h
}

/// Transmission `S21(omega)` of `system`.
pub fn s21(system: &HybridSystem, omega: f64) -> Result<Complex64> {
    system.validate()?;
    Transmission::new(system).at(omega)
}

/// A system with its Hamiltonian assembled once, for evaluating S21 at many
/// probe frequencies.
#[derive(Clone, Debug)]
pub struct Transmission {
    hamiltonian: ComplexSquareMatrix,
    port: Vec<Complex64>,
    decoupled: bool,
}

impl Transmission {
    /// Assumes `system` is valid.
    pub fn new(system: &HybridSystem) -> Self {
        let port = system.port_vector();
        let decoupled = port.iter().all(|b| b.re == 0.0);
        Transmission {
            hamiltonian: assemble_hamiltonian(system),
            port,
            decoupled,
        }
    }

    pub fn at(&self, omega: f64) -> Result<Complex64> {
        if !omega.is_finite() {
            return Err(Error::InvalidParameter(format!("probe frequency {omega}")));
        }
        if self.decoupled {
            return Ok(Complex64::new(0.0, 0.0));
        }
        // M = i (w I - H)
        let n = self.hamiltonian.dim();
        let i = Complex64::i();
        let mut m = ComplexSquareMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                let delta = if r == c { omega } else { 0.0 };
                m[(r, c)] = i * (Complex64::new(delta, 0.0) - self.hamiltonian[(r, c)]);
            }
        }
        let x = m.solve(&self.port)?;
        Ok(self.port.iter().zip(&x).map(|(b, x)| b * x).sum())
    }
}

/// Eigenvalues of the coupling Hamiltonian, ascending by real part and then
/// by imaginary part.
pub fn eigenbranches(system: &HybridSystem) -> Result<Vec<Complex64>> {
    let h = build_coupling_hamiltonian(system)?;
    let mut ev = h.eigenvalues()?;
    sort_branches(&mut ev);
    Ok(ev)
}

pub(crate) fn sort_branches(ev: &mut [Complex64]) {
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}
