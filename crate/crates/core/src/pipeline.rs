//! End-to-end thickness study: for each thickness, build the map, read
//! ridges, fit the two swept couplings, measure both anticrossing gaps on the
//! fitted model, then regress the fitted couplings.

use crate::error::{Error, Result};
use crate::fitting::{
    extract_ridges, fit_map, linear_regression, FitProblem, FitResult, FreeParam, LinearFit, Param,
};
use crate::oracle::NoiseSpec;
use crate::sweep::{
    anticrossing_gap, compute_branches, compute_map, linspace, Crosslink, SpectrumMap,
    SweepTargets, SystemTemplate, ThicknessModel,
};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOptions {
    pub fields: Vec<f64>,
    pub freqs: Vec<f64>,
    /// Noise added to every map; the seed is offset by the thickness index.
    pub noise: Option<NoiseSpec>,
    /// Ridges per column; defaults to the mode count.
    pub n_ridges: Option<usize>,
    /// Defaults to three frequency steps.
    pub min_separation: Option<f64>,
    /// Field samples used to locate each gap on the fitted model.
    pub gap_points: usize,
    pub keep_maps: bool,
}

impl PipelineOptions {
    pub fn new(fields: Vec<f64>, freqs: Vec<f64>) -> Self {
        PipelineOptions {
            fields,
            freqs,
            noise: None,
            n_ridges: None,
            min_separation: None,
            gap_points: 801,
            keep_maps: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThicknessRow {
    pub t: f64,
    /// Fitted coupling of the dependent pair.
    pub g1: f64,
    /// Fitted coupling of the driven pair.
    pub g2: f64,
    /// Anticrossing gap at the dependent pair's magnon crossing.
    pub gap_p1: f64,
    /// Anticrossing gap at the driven pair's magnon crossing.
    pub gap_p2: f64,
    pub fit: FitResult,
    pub map: Option<SpectrumMap>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThicknessOutcome {
    pub rows: Vec<ThicknessRow>,
    /// Fitted g2 against t; `None` with fewer than two distinct thicknesses.
    pub g2_vs_t: Option<LinearFit>,
    /// Fitted g1 against fitted g2.
    pub g1_vs_g2: Option<LinearFit>,
}

fn magnon_of(template: &SystemTemplate, pair: (usize, usize)) -> Result<usize> {
    let r = template.resonator_index().ok_or_else(|| {
        Error::InvalidSystem("thickness study needs a field-independent resonator".into())
    })?;
    match pair {
        (a, b) if a == r && b != r => Ok(b),
        (a, b) if b == r && a != r => Ok(a),
        _ => Err(Error::InvalidSystem(format!(
            "pair ({}, {}) does not join the resonator to a magnon",
            pair.0, pair.1
        ))),
    }
}

fn measured_gap(template: &SystemTemplate, magnon: usize, g: f64, points: usize) -> Result<f64> {
    let half_width = (4.0 * g).max(6.0 * template.feature_scale());
    let window = template.crossing_window(magnon, half_width)?;
    let fields = linspace(window.0, window.1, points);
    let curves = compute_branches(template, &fields)?;
    Ok(anticrossing_gap(&curves, window)?.gap)
}

pub fn thickness_pipeline(
    base: &SystemTemplate,
    model: &ThicknessModel,
    crosslink: &Crosslink,
    targets: SweepTargets,
    thicknesses: &[f64],
    options: &PipelineOptions,
) -> Result<ThicknessOutcome> {
    let systems = crate::sweep::thickness_sweep(base, model, crosslink, targets, thicknesses)?;
    let p1 = magnon_of(base, targets.dependent)?;
    let p2 = magnon_of(base, targets.driven)?;
    let (f_lo, f_hi) = match options.freqs.as_slice() {
        [a, .., b] => (*a, *b),
        _ => return Err(Error::InvalidGrid("need at least two frequencies".into())),
    };
    let step = (f_hi - f_lo) / (options.freqs.len() - 1) as f64;
    let upper = (f_hi - f_lo) / 2.0;
    let n_ridges = options.n_ridges.unwrap_or(base.len());
    let min_sep = options.min_separation.unwrap_or(3.0 * step);

    let mut rows = Vec::with_capacity(systems.len());
    for (k, (t, truth)) in systems.into_iter().enumerate() {
        let mut map = compute_map(&truth, &options.fields, &options.freqs)?;
        if let Some(noise) = &options.noise {
            NoiseSpec::new(noise.sigma, noise.seed.wrapping_add(k as u64))?.apply(&mut map);
        }
        let ridges = extract_ridges(&map, n_ridges, min_sep)?;
        // The generating couplings must not leak into the starting point.
        let mut start = truth.clone();
        let neutral = upper / 4.0;
        let free: Vec<FreeParam> = [targets.driven, targets.dependent]
            .iter()
            .map(|&(a, b)| FreeParam {
                param: Param::Coupling(a, b),
                lower: 0.0,
                upper,
                initial: neutral,
            })
            .collect();
        for f in &free {
            f.param.set(&mut start, neutral)?;
        }
        let mut problem = FitProblem::new(start, free)?;
        problem.seed_initial_guesses(&map, &ridges, &[0, 1]);
        let fit = fit_map(&map, &problem)?;
        let (g2, g1) = (fit.params[0].value, fit.params[1].value);
        let fitted = problem.apply(&[g2, g1])?;
        rows.push(ThicknessRow {
            t,
            g1,
            g2,
            gap_p1: measured_gap(&fitted, p1, g1, options.gap_points)?,
            gap_p2: measured_gap(&fitted, p2, g2, options.gap_points)?,
            fit,
            map: options.keep_maps.then_some(map),
        });
    }
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let g1s: Vec<f64> = rows.iter().map(|r| r.g1).collect();
    let g2s: Vec<f64> = rows.iter().map(|r| r.g2).collect();
    Ok(ThicknessOutcome {
        g2_vs_t: linear_regression(&ts, &g2s).ok(),
        g1_vs_g2: linear_regression(&g2s, &g1s).ok(),
        rows,
    })
}
