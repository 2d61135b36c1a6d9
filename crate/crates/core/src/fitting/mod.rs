//! Parameter estimation from spectrum maps.
//!
//! Two objectives are offered. [`fit_map`] compares complex S21 over the full
//! grid. [`fit_branches`] compares ridge frequencies with the nearest real
//! part of the model eigenvalues at the same field. Both run the bounded
//! minimizer in [`optim`] and, if that does not converge, up to five jittered
//! restarts.

pub mod optim;
mod regression;
mod ridges;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kittel::KittelMaterial;
use crate::model::{sort_branches, Transmission};
use crate::sweep::{Dispersion, SpectrumMap, SystemTemplate};

pub use optim::OptimOptions;
pub use regression::{linear_regression, LinearFit};
pub use ridges::{estimate_coupling, estimate_linewidth, extract_ridges, Ridges};

/// A scalar of a [`SystemTemplate`] that a fit may vary. Indices refer to
/// template mode positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Param {
    Coupling(usize, usize),
    Alpha(usize),
    Beta(usize),
    /// Frequency of a field-independent mode.
    Omega(usize),
    Gamma(usize),
    FourPiM(usize),
}

impl Param {
    /// Parses `g.<a>.<b>`, `alpha.<m>`, `beta.<m>`, `omega.<m>`, `gamma.<m>`
    /// or `four_pi_m.<m>` against the template's mode labels.
    pub fn parse(name: &str, template: &SystemTemplate) -> Result<Param> {
        let parts: Vec<&str> = name.split('.').collect();
        let idx = |label: &str| {
            template.index_of(label).ok_or_else(|| {
                Error::InvalidParameter(format!("{name}: no mode labelled '{label}'"))
            })
        };
        let p = match parts.as_slice() {
            ["g", a, b] => Param::Coupling(idx(a)?, idx(b)?),
            ["alpha", m] => Param::Alpha(idx(m)?),
            ["beta", m] => Param::Beta(idx(m)?),
            ["omega", m] => Param::Omega(idx(m)?),
            ["gamma", m] => Param::Gamma(idx(m)?),
            ["four_pi_m", m] => Param::FourPiM(idx(m)?),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unrecognised parameter '{name}'"
                )))
            }
        };
        p.get(template)?;
        Ok(p)
    }

    pub fn name(&self, template: &SystemTemplate) -> String {
        let l = |i: usize| template.modes()[i].label.as_str();
        match *self {
            Param::Coupling(a, b) => format!("g.{}.{}", l(a), l(b)),
            Param::Alpha(m) => format!("alpha.{}", l(m)),
            Param::Beta(m) => format!("beta.{}", l(m)),
            Param::Omega(m) => format!("omega.{}", l(m)),
            Param::Gamma(m) => format!("gamma.{}", l(m)),
            Param::FourPiM(m) => format!("four_pi_m.{}", l(m)),
        }
    }

    fn material(template: &SystemTemplate, m: usize) -> Result<&KittelMaterial> {
        template
            .modes()
            .get(m)
            .and_then(|mode| mode.material())
            .ok_or_else(|| Error::InvalidParameter(format!("mode {m} has no Kittel material")))
    }

    pub fn get(&self, template: &SystemTemplate) -> Result<f64> {
        let n = template.len();
        let check = |i: usize| {
            if i < n {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "mode index {i} out of range"
                )))
            }
        };
        match *self {
            Param::Coupling(a, b) => {
                check(a)?;
                check(b)?;
                if a == b {
                    return Err(Error::InvalidParameter("self-coupling".into()));
                }
                Ok(template.couplings().get(a, b))
            }
            Param::Alpha(m) => check(m).map(|_| template.modes()[m].alpha),
            Param::Beta(m) => check(m).map(|_| template.modes()[m].beta),
            Param::Omega(m) => {
                check(m)?;
                match template.modes()[m].dispersion {
                    Dispersion::Fixed(w) => Ok(w),
                    Dispersion::Kittel(_) => Err(Error::InvalidParameter(format!(
                        "mode {m} follows the Kittel relation; fit gamma or four_pi_m instead"
                    ))),
                }
            }
            Param::Gamma(m) => Ok(Self::material(template, m)?.gamma),
            Param::FourPiM(m) => Ok(Self::material(template, m)?.four_pi_m),
        }
    }

    pub fn set(&self, template: &mut SystemTemplate, value: f64) -> Result<()> {
        self.get(template)?;
        match *self {
            Param::Coupling(a, b) => template.couplings_mut().set(a, b, value)?,
            Param::Alpha(m) => template.modes_mut()[m].alpha = value,
            Param::Beta(m) => template.modes_mut()[m].beta = value,
            Param::Omega(m) => template.modes_mut()[m].dispersion = Dispersion::Fixed(value),
            Param::Gamma(m) => {
                if let Dispersion::Kittel(mat) = &mut template.modes_mut()[m].dispersion {
                    mat.gamma = value;
                }
            }
            Param::FourPiM(m) => {
                if let Dispersion::Kittel(mat) = &mut template.modes_mut()[m].dispersion {
                    mat.four_pi_m = value;
                }
            }
        }
        Ok(())
    }
}

/// A free parameter with its closed bounds and starting value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeParam {
    pub param: Param,
    pub lower: f64,
    pub upper: f64,
    pub initial: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub optim: OptimOptions,
    /// Jittered restarts tried when the first run does not converge.
    pub restarts: usize,
    /// Relative jitter of restart points around the initial guess.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            optim: OptimOptions::default(),
            restarts: 5,
            jitter: 0.3,
            seed: 0,
        }
    }
}

/// A template, the parameters to vary, and how to search.
#[derive(Clone, Debug, PartialEq)]
pub struct FitProblem {
    pub template: SystemTemplate,
    pub free: Vec<FreeParam>,
    pub options: FitOptions,
}

impl FitProblem {
    pub fn new(template: SystemTemplate, free: Vec<FreeParam>) -> Result<Self> {
        let problem = FitProblem {
            template,
            free,
            options: FitOptions::default(),
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, f) in self.free.iter().enumerate() {
            let name = f.param.name(&self.template);
            f.param.get(&self.template)?;
            if !(f.lower.is_finite() && f.upper.is_finite() && f.lower <= f.upper) {
                return Err(Error::InvalidParameter(format!(
                    "{name}: bounds [{}, {}] must be finite with lower <= upper",
                    f.lower, f.upper
                )));
            }
            if !(f.initial >= f.lower && f.initial <= f.upper) {
                return Err(Error::InvalidParameter(format!(
                    "{name}: initial guess {} outside [{}, {}]",
                    f.initial, f.lower, f.upper
                )));
            }
            if self.free[..k].iter().any(|o| same_param(o.param, f.param)) {
                return Err(Error::InvalidParameter(format!("{name} listed twice")));
            }
        }
        Ok(())
    }

    /// The template with `values` written into the free parameters.
    pub fn apply(&self, values: &[f64]) -> Result<SystemTemplate> {
        let mut t = self.template.clone();
        for (f, &v) in self.free.iter().zip(values) {
            f.param.set(&mut t, v)?;
        }
        Ok(t)
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (
            self.free.iter().map(|f| f.initial).collect(),
            self.free.iter().map(|f| f.lower).collect(),
            self.free.iter().map(|f| f.upper).collect(),
        )
    }

    /// Re-estimates the initial guesses of the free parameters at positions
    /// `which` from the data: a resonator-magnon coupling becomes half the
    /// ridge splitting at its crossing, and a damping comes from the
    /// linewidth of its mode where that mode is most isolated (split evenly
    /// between `alpha` and `beta` when both are free). Parameters without an
    /// estimate keep their current guess.
    pub fn seed_initial_guesses(&mut self, map: &SpectrumMap, ridges: &Ridges, which: &[usize]) {
        let r = self.template.resonator_index();
        let damping = self
            .template
            .modes()
            .iter()
            .map(|m| m.alpha + m.beta)
            .fold(0.0, f64::max);
        let half_width = if damping > 0.0 { 3.0 * damping } else { 0.1 };
        let mut total_width: Vec<Option<f64>> = vec![None; self.template.len()];
        for &k in which {
            let Some(f) = self.free.get(k).copied() else {
                continue;
            };
            let estimate = match f.param {
                Param::Coupling(a, b) => r.and_then(|r| {
                    let magnon = if a == r {
                        b
                    } else if b == r {
                        a
                    } else {
                        return None;
                    };
                    let w_r = self.template.modes()[r].omega_at(0.0).ok()?;
                    let window = self.template.crossing_window(magnon, half_width).ok()?;
                    estimate_coupling(ridges, window, w_r)
                }),
                Param::Alpha(m) | Param::Beta(m) => {
                    if total_width[m].is_none() {
                        total_width[m] = isolated_linewidth(&self.template, map, m);
                    }
                    total_width[m].map(|kappa| {
                        let other = match f.param {
                            Param::Alpha(_) => Param::Beta(m),
                            _ => Param::Alpha(m),
                        };
                        let other_free = which
                            .iter()
                            .any(|&j| self.free.get(j).is_some_and(|o| o.param == other));
                        if other_free {
                            kappa / 2.0
                        } else {
                            kappa - other.get(&self.template).unwrap_or(0.0)
                        }
                    })
                }
                _ => None,
            };
            if let Some(v) = estimate.filter(|v| v.is_finite()) {
                let f = &mut self.free[k];
                f.initial = v.clamp(f.lower, f.upper);
            }
        }
    }
}

/// Half width at half maximum of mode `m` in the field column where its bare
/// frequency is farthest from every other mode while still inside the band.
fn isolated_linewidth(template: &SystemTemplate, map: &SpectrumMap, m: usize) -> Option<f64> {
    let freqs = map.freqs();
    let (f_lo, f_hi) = (*freqs.first()?, *freqs.last()?);
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, &h) in map.fields().iter().enumerate() {
        let Ok(w) = template.modes()[m].omega_at(h) else {
            continue;
        };
        if !(w > f_lo && w < f_hi) {
            continue;
        }
        let isolation = (0..template.len())
            .filter(|&o| o != m)
            .filter_map(|o| template.modes()[o].omega_at(h).ok())
            .map(|wo| (wo - w).abs())
            .fold(f64::INFINITY, f64::min)
            .min(w - f_lo)
            .min(f_hi - w);
        if best.is_none_or(|b| isolation > b.1) {
            best = Some((i, isolation, w));
        }
    }
    let (i, _, w) = best?;
    let mag: Vec<f64> = map.column(i).iter().map(|z| z.norm()).collect();
    let peak = (1..mag.len().saturating_sub(1))
        .filter(|&j| mag[j] > mag[j - 1] && mag[j] >= mag[j + 1])
        .min_by(|&a, &b| (freqs[a] - w).abs().total_cmp(&(freqs[b] - w).abs()))?;
    estimate_linewidth(map, i, peak)
}

fn same_param(a: Param, b: Param) -> bool {
    match (a, b) {
        (Param::Coupling(a1, b1), Param::Coupling(a2, b2)) => {
            (a1, b1) == (a2, b2) || (a1, b1) == (b2, a2)
        }
        _ => a == b,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittedParam {
    pub name: String,
    pub value: f64,
    /// From the local quadratic model; NaN when not identifiable.
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub params: Vec<FittedParam>,
    /// Final sum of squared residuals.
    pub residual: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective after each accepted iteration of the winning run.
    pub history: Vec<f64>,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn values(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.value).collect()
    }
}

fn run<F>(problem: &FitProblem, residuals: F) -> Result<FitResult>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    problem.validate()?;
    let (x0, lo, hi) = problem.bounds();
    let opts = &problem.options;
    let mut best = optim::minimize(&residuals, &x0, &lo, &hi, &opts.optim);
    if !best.converged && !x0.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 0..opts.restarts {
            let start: Vec<f64> = (0..x0.len())
                .map(|k| {
                    let scale = if x0[k] != 0.0 {
                        x0[k].abs()
                    } else {
                        hi[k] - lo[k]
                    };
                    let v = x0[k] + rng.gen_range(-opts.jitter..=opts.jitter) * scale;
                    v.clamp(lo[k], hi[k])
                })
                .collect();
            let mut out = optim::minimize(&residuals, &start, &lo, &hi, &opts.optim);
            out.evaluations += best.evaluations;
            if out.objective < best.objective
                || (out.converged && !best.converged && out.objective <= best.objective)
            {
                best = out;
            } else {
                best.evaluations = out.evaluations;
            }
            if best.converged {
                break;
            }
        }
    }
    if !best.objective.is_finite() {
        return Err(Error::DegenerateProblem(
            "model could not be evaluated anywhere in the search".into(),
        ));
    }
    let stderr = optim::standard_errors(&residuals, &best.x, &lo, &hi);
    Ok(FitResult {
        params: problem
            .free
            .iter()
            .zip(best.x.iter().zip(stderr))
            .map(|(f, (&value, stderr))| FittedParam {
                name: f.param.name(&problem.template),
                value,
                stderr,
            })
            .collect(),
        residual: best.objective,
        iterations: best.iterations,
        evaluations: best.evaluations,
        converged: best.converged,
        history: best.history,
    })
}

/// Complex residuals `S21_model - S21_data` over the whole grid, real parts
/// then imaginary parts per point.
pub fn map_residuals(template: &SystemTemplate, map: &SpectrumMap) -> Option<Vec<f64>> {
    use rayon::prelude::*;
    let nf = map.freqs().len();
    let rows: Option<Vec<Vec<f64>>> = map
        .fields()
        .par_iter()
        .enumerate()
        .map(|(i, &h)| {
            let sys = template.instantiate(h).ok()?;
            let tx = Transmission::new(&sys);
            let data = map.column(i);
            let mut out = Vec::with_capacity(2 * nf);
            for (j, &w) in map.freqs().iter().enumerate() {
                let d = tx.at(w).ok()? - data[j];
                out.push(d.re);
                out.push(d.im);
            }
            Some(out)
        })
        .collect();
    rows.map(|r| r.concat())
}

/// Least-squares fit of the full complex map.
pub fn fit_map(map: &SpectrumMap, problem: &FitProblem) -> Result<FitResult> {
    let points = map.values().len();
    if points < problem.free.len() {
        return Err(Error::DegenerateProblem(format!(
            "{points} map points for {} free parameters",
            problem.free.len()
        )));
    }
    run(problem, |x| map_residuals(&problem.apply(x).ok()?, map))
}

/// Distance from each ridge point to the nearest real part of the model
/// eigenvalues at that field; ties go to the lower branch.
pub fn branch_residuals(template: &SystemTemplate, ridges: &Ridges) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(ridges.count());
    for (h, peaks) in ridges.fields.iter().zip(&ridges.peaks) {
        if peaks.is_empty() {
            continue;
        }
        let sys = template.instantiate(*h).ok()?;
        let hmat = crate::model::build_coupling_hamiltonian(&sys).ok()?;
        let mut ev = hmat.eigenvalues().ok()?;
        sort_branches(&mut ev);
        for &f in peaks {
            let nearest = ev.iter().map(|z| f - z.re).fold(f64::INFINITY, |best, d| {
                if d.abs() < best.abs() {
                    d
                } else {
                    best
                }
            });
            out.push(nearest);
        }
    }
    Some(out)
}

/// Least-squares fit of eigenbranch real parts to ridge frequencies.
pub fn fit_branches(ridges: &Ridges, problem: &FitProblem) -> Result<FitResult> {
    let count = ridges.count();
    if count < problem.free.len() + 2 {
        return Err(Error::DegenerateProblem(format!(
            "{count} ridge points for {} free parameters (need at least {})",
            problem.free.len(),
            problem.free.len() + 2
        )));
    }
    run(problem, |x| {
        branch_residuals(&problem.apply(x).ok()?, ridges)
    })
}

#[cfg(test)]
mod tests;
