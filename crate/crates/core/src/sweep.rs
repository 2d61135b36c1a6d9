//! Field sweeps over a system template: transmission maps, eigenbranch
//! curves, anticrossing gaps and YIG-thickness series.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kittel::{field_for_frequency, kittel_frequency, KittelMaterial};
use crate::model::{sort_branches, Couplings, HybridSystem, ModeSpec, Transmission};

/// Evenly spaced grid including both end points.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (count - 1) as f64;
            (0..count)
                .map(|k| {
                    if k + 1 == count {
                        stop
                    } else {
                        start + step * k as f64
                    }
                })
                .collect()
        }
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid(format!("{name} grid is empty")));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "{name} grid has non-finite values"
        )));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(format!(
            "{name} grid is not strictly ascending"
        )));
    }
    Ok(())
}

/// How a mode's resonance depends on the applied field.
#[derive(Clone, Debug, PartialEq)]
pub enum Dispersion {
    /// Field-independent, e.g. the ring resonator.
    Fixed(f64),
    /// Magnon following the Kittel relation.
    Kittel(KittelMaterial),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemplateMode {
    pub label: String,
    pub dispersion: Dispersion,
    pub alpha: f64,
    pub beta: f64,
}

impl TemplateMode {
    pub fn fixed(label: impl Into<String>, omega: f64, alpha: f64, beta: f64) -> Self {
        TemplateMode {
            label: label.into(),
            dispersion: Dispersion::Fixed(omega),
            alpha,
            beta,
        }
    }

    pub fn kittel(
        label: impl Into<String>,
        material: KittelMaterial,
        alpha: f64,
        beta: f64,
    ) -> Self {
        TemplateMode {
            label: label.into(),
            dispersion: Dispersion::Kittel(material),
            alpha,
            beta,
        }
    }

    pub fn omega_at(&self, h: f64) -> Result<f64> {
        match &self.dispersion {
            Dispersion::Fixed(w) => Ok(*w),
            Dispersion::Kittel(m) => kittel_frequency(m, h),
        }
    }

    pub fn material(&self) -> Option<&KittelMaterial> {
        match &self.dispersion {
            Dispersion::Kittel(m) => Some(m),
            Dispersion::Fixed(_) => None,
        }
    }
}

/// A hybrid system whose magnon frequencies are set by the applied field.
///
/// Modes keep their listed order when instantiated, so the canonical layout
/// `[magnon1, resonator, magnon2]` carries through to the Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemTemplate {
    modes: Vec<TemplateMode>,
    couplings: Couplings,
}

impl SystemTemplate {
    pub fn new(modes: Vec<TemplateMode>, couplings: Couplings) -> Result<Self> {
        let t = SystemTemplate { modes, couplings };
        t.validate()?;
        Ok(t)
    }

    /// `[magnon1, resonator, magnon2]` with couplings `g1` (magnon1-resonator)
    /// and `g2` (resonator-magnon2).
    pub fn canonical(
        magnon1: TemplateMode,
        resonator: TemplateMode,
        magnon2: TemplateMode,
        g1: f64,
        g2: f64,
    ) -> Result<Self> {
        let couplings = Couplings::new(3).with(0, 1, g1)?.with(1, 2, g2)?;
        Self::new(vec![magnon1, resonator, magnon2], couplings)
    }

    pub fn validate(&self) -> Result<()> {
        if self.couplings.len() != self.modes.len() {
            return Err(Error::InvalidSystem(format!(
                "coupling table is {0}x{0} for {1} modes",
                self.couplings.len(),
                self.modes.len()
            )));
        }
        for m in &self.modes {
            if let Dispersion::Kittel(mat) = &m.dispersion {
                mat.validate()?;
            }
        }
        // Any instantiation checks the remaining invariants.
        if !self.modes.is_empty() {
            self.instantiate(0.0)?;
        }
        Ok(())
    }

    pub fn modes(&self) -> &[TemplateMode] {
        &self.modes
    }

    pub fn modes_mut(&mut self) -> &mut [TemplateMode] {
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

    /// Index of the first field-independent mode.
    pub fn resonator_index(&self) -> Option<usize> {
        self.modes
            .iter()
            .position(|m| matches!(m.dispersion, Dispersion::Fixed(_)))
    }

    pub fn magnon_indices(&self) -> Vec<usize> {
        (0..self.modes.len())
            .filter(|&i| self.modes[i].material().is_some())
            .collect()
    }

    /// The concrete system at applied field `h`.
    pub fn instantiate(&self, h: f64) -> Result<HybridSystem> {
        if h < 0.0 || h.is_nan() {
            return Err(Error::NegativeField(h));
        }
        let modes = self
            .modes
            .iter()
            .map(|m| {
                Ok(ModeSpec::new(
                    m.label.clone(),
                    m.omega_at(h)?,
                    m.alpha,
                    m.beta,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        HybridSystem::new(modes, self.couplings.clone())
    }

    /// Field where magnon `magnon` is degenerate with the resonator.
    pub fn crossing_field(&self, magnon: usize) -> Result<f64> {
        let (material, w_r) = self.crossing_parts(magnon)?;
        field_for_frequency(material, w_r)
    }

    /// Field interval over which magnon `magnon` sweeps through
    /// `resonator +- half_width` in frequency.
    pub fn crossing_window(&self, magnon: usize, half_width: f64) -> Result<(f64, f64)> {
        let (material, w_r) = self.crossing_parts(magnon)?;
        let lo = field_for_frequency(material, (w_r - half_width).max(0.0))?;
        let hi = field_for_frequency(material, w_r + half_width)?;
        Ok((lo, hi))
    }

    fn crossing_parts(&self, magnon: usize) -> Result<(&KittelMaterial, f64)> {
        let material = self
            .modes
            .get(magnon)
            .and_then(TemplateMode::material)
            .ok_or_else(|| Error::InvalidParameter(format!("mode {magnon} is not a magnon")))?;
        let r = self
            .resonator_index()
            .ok_or_else(|| Error::InvalidSystem("template has no fixed-frequency mode".into()))?;
        Ok((material, self.modes[r].omega_at(0.0)?))
    }

    /// Largest of the coupling magnitudes and total mode dampings.
    pub fn feature_scale(&self) -> f64 {
        let g = self
            .couplings
            .nonzero()
            .map(|(_, _, g)| g.abs())
            .fold(0.0, f64::max);
        let damping = self
            .modes
            .iter()
            .map(|m| m.alpha + m.beta)
            .fold(0.0, f64::max);
        g.max(damping)
    }

    /// Default probe grid: 401 points over the resonator frequency
    /// +- 6 feature scales.
    pub fn default_freqs(&self) -> Result<Vec<f64>> {
        let r = self
            .resonator_index()
            .ok_or_else(|| Error::InvalidSystem("template has no fixed-frequency mode".into()))?;
        let w_r = self.modes[r].omega_at(0.0)?;
        let span = 6.0 * self.feature_scale().max(f64::EPSILON * w_r.max(1.0));
        Ok(linspace((w_r - span).max(0.0), w_r + span, 401))
    }
}

/// Complex S21 sampled on a field x frequency grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumMap {
    fields: Vec<f64>,
    freqs: Vec<f64>,
    values: Vec<Complex64>,
}

impl SpectrumMap {
    /// `values` is row-major, one row per field.
    pub fn new(fields: Vec<f64>, freqs: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        check_grid("field", &fields)?;
        check_grid("frequency", &freqs)?;
        if values.len() != fields.len() * freqs.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a {}x{} grid",
                values.len(),
                fields.len(),
                freqs.len()
            )));
        }
        Ok(SpectrumMap {
            fields,
            freqs,
            values,
        })
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn get(&self, field: usize, freq: usize) -> Complex64 {
        self.values[field * self.freqs.len() + freq]
    }

    /// S21 over frequency at one field point.
    pub fn column(&self, field: usize) -> &[Complex64] {
        let nf = self.freqs.len();
        &self.values[field * nf..(field + 1) * nf]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub fn instantiate(template: &SystemTemplate, h: f64) -> Result<HybridSystem> {
    template.instantiate(h)
}

/// S21 of the instantiated template at every grid point.
pub fn compute_map(
    template: &SystemTemplate,
    fields: &[f64],
    freqs: &[f64],
) -> Result<SpectrumMap> {
    check_grid("field", fields)?;
    check_grid("frequency", freqs)?;
    let rows: Vec<Vec<Complex64>> = fields
        .par_iter()
        .map(|&h| {
            let sys = template.instantiate(h).map_err(|e| e.at(h, None))?;
            let tx = Transmission::new(&sys);
            freqs
                .iter()
                .map(|&w| tx.at(w).map_err(|e| e.at(h, Some(w))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    SpectrumMap::new(fields.to_vec(), freqs.to_vec(), rows.concat())
}

/// Sorted eigenvalues of the coupling Hamiltonian along a field sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchCurves {
    pub fields: Vec<f64>,
    pub branches: Vec<Vec<Complex64>>,
}

impl BranchCurves {
    pub fn mode_count(&self) -> usize {
        self.branches.first().map_or(0, Vec::len)
    }

    /// Real part of branch `k` across the sweep.
    pub fn real_branch(&self, k: usize) -> Vec<f64> {
        self.branches.iter().map(|b| b[k].re).collect()
    }
}

pub fn compute_branches(template: &SystemTemplate, fields: &[f64]) -> Result<BranchCurves> {
    check_grid("field", fields)?;
    let branches = fields
        .par_iter()
        .map(|&h| {
            let sys = template.instantiate(h).map_err(|e| e.at(h, None))?;
            let h_mat = crate::model::build_coupling_hamiltonian(&sys)?;
            let mut ev = h_mat.eigenvalues().map_err(|e| e.at(h, None))?;
            sort_branches(&mut ev);
            Ok(ev)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BranchCurves {
        fields: fields.to_vec(),
        branches,
    })
}

/// Minimal splitting between adjacent branches near one crossing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnticrossingReport {
    pub h_star: f64,
    pub gap: f64,
    /// `gap / 2`; exact for a symmetric lossless two-mode crossing.
    pub g_estimate: f64,
    /// The crossing is between sorted branches `lower_branch` and `lower_branch + 1`.
    pub lower_branch: usize,
}

/// Vertex of the parabola through three points, clamped to the bracket.
pub(crate) fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let (x0, x1, x2) = (x[0], x[1], x[2]);
    let (y0, y1, y2) = (y[0], y[1], y[2]);
    // Newton form: y = y0 + d1 (x - x0) + d2 (x - x0)(x - x1)
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let d2 = (d12 - d01) / (x2 - x0);
    if !(d2 > 0.0) {
        return (x1, y1);
    }
    let xv = (0.5 * (x0 + x1 - d01 / d2)).clamp(x0, x2);
    let yv = y0 + d01 * (xv - x0) + d2 * (xv - x0) * (xv - x1);
    (xv, yv)
}

/// Locates the anticrossing inside `window` (field interval, Oe).
///
/// Every adjacent pair of real-part branches is scanned; pairs whose smallest
/// separation falls on the window edge are ignored, and the smallest interior
/// minimum wins. The minimum is refined through the parabola on the three
/// bracketing field points.
pub fn anticrossing_gap(curves: &BranchCurves, window: (f64, f64)) -> Result<AnticrossingReport> {
    let (lo, hi) = window;
    let idx: Vec<usize> = (0..curves.fields.len())
        .filter(|&i| curves.fields[i] >= lo && curves.fields[i] <= hi)
        .collect();
    if idx.len() < 3 {
        return Err(Error::WindowTooNarrow {
            lo,
            hi,
            points: idx.len(),
        });
    }
    let n = curves.mode_count();
    let mut best: Option<(usize, usize, f64)> = None;
    for k in 0..n.saturating_sub(1) {
        let sep = |i: usize| curves.branches[i][k + 1].re - curves.branches[i][k].re;
        let (pos, min) = idx
            .iter()
            .enumerate()
            .map(|(p, &i)| (p, sep(i)))
            .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        if pos == 0 || pos + 1 == idx.len() {
            continue;
        }
        if best.map_or(true, |(_, _, m)| min < m) {
            best = Some((k, pos, min));
        }
    }
    let (k, pos, min) = best.ok_or(Error::NoMinimum { lo, hi })?;
    let pts = [idx[pos - 1], idx[pos], idx[pos + 1]];
    let sep = |i: usize| curves.branches[i][k + 1].re - curves.branches[i][k].re;
    let (h_star, gap) = parabola_vertex(pts.map(|i| curves.fields[i]), pts.map(sep));
    let gap = gap.clamp(0.0, min.max(0.0));
    Ok(AnticrossingReport {
        h_star,
        gap,
        g_estimate: gap / 2.0,
        lower_branch: k,
    })
}

/// Linear coupling-versus-thickness law, `g(t) = slope * t + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThicknessModel {
    pub slope: f64,
    pub intercept: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl ThicknessModel {
    pub fn new(slope: f64, intercept: f64, t_min: f64, t_max: f64) -> Result<Self> {
        let m = ThicknessModel {
            slope,
            intercept,
            t_min,
            t_max,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.slope, self.intercept, self.t_min, self.t_max]
            .iter()
            .all(|x| x.is_finite())
            || self.t_min > self.t_max
        {
            return Err(Error::InvalidParameter(format!(
                "thickness model {self:?} needs finite values and t_min <= t_max"
            )));
        }
        // Linear, so the ends bound the range.
        for t in [self.t_min, self.t_max] {
            let value = self.eval(t);
            if value < 0.0 {
                return Err(Error::NegativeCoupling { t, value });
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.slope * t + self.intercept
    }
}

/// Dependent coupling as a linear function of the driven one, `g1 = slope * g2 + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crosslink {
    pub slope: f64,
    pub intercept: f64,
}

/// Which coupling entries a thickness sweep drives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepTargets {
    /// Coupling set from the thickness model (the YIG-resonator pair).
    pub driven: (usize, usize),
    /// Coupling set through the crosslink (the permalloy-resonator pair).
    pub dependent: (usize, usize),
}

impl SweepTargets {
    /// `g2 = (1, 2)` drives `g1 = (0, 1)`.
    pub const CANONICAL: SweepTargets = SweepTargets {
        driven: (1, 2),
        dependent: (0, 1),
    };
}

/// One template per thickness with the driven and dependent couplings set
/// from the linear laws; every other parameter is copied from `base`.
pub fn thickness_sweep(
    base: &SystemTemplate,
    model: &ThicknessModel,
    crosslink: &Crosslink,
    targets: SweepTargets,
    thicknesses: &[f64],
) -> Result<Vec<(f64, SystemTemplate)>> {
    model.validate()?;
    thicknesses
        .iter()
        .map(|&t| {
            if !(t >= model.t_min && t <= model.t_max) {
                return Err(Error::InvalidParameter(format!(
                    "thickness {t} um outside [{}, {}]",
                    model.t_min, model.t_max
                )));
            }
            let g2 = model.eval(t);
            let g1 = crosslink.slope * g2 + crosslink.intercept;
            for value in [g1, g2] {
                if value < 0.0 {
                    return Err(Error::NegativeCoupling { t, value });
                }
            }
            let mut tpl = base.clone();
            tpl.couplings.set(targets.driven.0, targets.driven.1, g2)?;
            tpl.couplings
                .set(targets.dependent.0, targets.dependent.1, g1)?;
            Ok((t, tpl))
        })
        .collect()
}
