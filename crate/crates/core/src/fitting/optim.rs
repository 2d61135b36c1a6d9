//! Bounded least-squares minimizer: Nelder-Mead on the unit box, followed
//! by Levenberg-Marquardt steps with central-difference Jacobians.
//!
//! Parameters are mapped to `u in [0, 1]` per coordinate (`x = lo + u (hi - lo)`),
//! and every trial point is projected back onto the box.

use nalgebra::{DMatrix, DVector};

/// Stopping rules and budgets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimOptions {
    /// Relative objective decrease per iteration below which the run is converged.
    pub ftol: f64,
    /// Step norm (box-normalized) below which the run is converged.
    pub xtol: f64,
    pub max_evaluations: usize,
    /// Levenberg-Marquardt refinement after the simplex stage.
    pub refine: bool,
    pub max_refine_iterations: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            ftol: 1e-10,
            xtol: 1e-12,
            max_evaluations: 4000,
            refine: true,
            max_refine_iterations: 60,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective after each accepted iteration; nonincreasing.
    pub history: Vec<f64>,
}

/// Residual vector as a function of the parameters. `None` marks an
/// infeasible point (model evaluation failed).
pub trait Residuals {
    fn residuals(&self, x: &[f64]) -> Option<Vec<f64>>;
}

impl<F> Residuals for F
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    fn residuals(&self, x: &[f64]) -> Option<Vec<f64>> {
        self(x)
    }
}

pub(crate) fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

struct Boxed<'a, R: Residuals> {
    inner: &'a R,
    lo: &'a [f64],
    hi: &'a [f64],
    evaluations: usize,
}

impl<R: Residuals> Boxed<'_, R> {
    fn to_x(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lo.iter().zip(self.hi))
            .map(|(&u, (&lo, &hi))| (lo + u.clamp(0.0, 1.0) * (hi - lo)).clamp(lo, hi))
            .collect()
    }

    fn residuals(&mut self, u: &[f64]) -> Option<Vec<f64>> {
        self.evaluations += 1;
        let r = self.inner.residuals(&self.to_x(u))?;
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn objective(&mut self, u: &[f64]) -> f64 {
        self.residuals(u).map_or(f64::INFINITY, |r| sum_sq(&r))
    }
}

fn project(u: &mut [f64]) {
    u.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Minimizes `sum(r(x)^2)` over the box `[lo, hi]` starting from `x0`.
pub fn minimize<R: Residuals>(
    problem: &R,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &OptimOptions,
) -> OptimOutcome {
    let p = x0.len();
    let mut f = Boxed {
        inner: problem,
        lo,
        hi,
        evaluations: 0,
    };
    let u0: Vec<f64> = (0..p)
        .map(|k| {
            let span = hi[k] - lo[k];
            if span > 0.0 {
                ((x0[k] - lo[k]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();

    if p == 0 {
        let objective = f.objective(&u0);
        return OptimOutcome {
            x: Vec::new(),
            objective,
            iterations: 0,
            evaluations: f.evaluations,
            converged: objective.is_finite(),
            history: vec![objective],
        };
    }

    let mut history = Vec::new();
    // The simplex only needs to reach the basin when a refinement follows.
    let (ftol, xtol) = if opts.refine {
        (1e-6, 1e-6)
    } else {
        (opts.ftol, opts.xtol)
    };
    let (mut u, mut fu, nm_iters, nm_converged) = nelder_mead(
        &mut f,
        &u0,
        x0,
        (ftol, xtol),
        opts.max_evaluations,
        &mut history,
    );
    let mut iterations = nm_iters;
    let mut converged = nm_converged;

    if opts.refine && fu.is_finite() {
        let (u2, f2, it, conv) = levenberg_marquardt(&mut f, &u, fu, opts, &mut history);
        iterations += it;
        converged = conv;
        u = u2;
        fu = f2;
    }

    OptimOutcome {
        x: f.to_x(&u),
        objective: fu,
        iterations,
        evaluations: f.evaluations,
        converged,
        history,
    }
}

fn nelder_mead<R: Residuals>(
    f: &mut Boxed<'_, R>,
    u0: &[f64],
    x0: &[f64],
    (ftol, xtol): (f64, f64),
    max_evaluations: usize,
    history: &mut Vec<f64>,
) -> (Vec<f64>, f64, usize, bool) {
    let p = u0.len();
    let mut simplex: Vec<Vec<f64>> = vec![u0.to_vec()];
    for k in 0..p {
        let span = f.hi[k] - f.lo[k];
        let mut v = u0.to_vec();
        let step = if span > 0.0 {
            (0.1 * x0[k].abs() / span).clamp(0.02, 0.25)
        } else {
            0.0
        };
        v[k] = if u0[k] + step <= 1.0 {
            u0[k] + step
        } else {
            u0[k] - step
        };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f.objective(v)).collect();
    let mut iterations = 0;
    let mut converged = false;

    while f.evaluations < max_evaluations {
        let mut order: Vec<usize> = (0..=p).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        history.push(best);
        let spread = values[p] - best;
        let size = simplex[1..]
            .iter()
            .map(|v| dist(v, &simplex[0]))
            .fold(0.0, f64::max);
        if best.is_finite() && (spread <= ftol * best.abs() || size <= xtol) {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..p)
            .map(|k| simplex[..p].iter().map(|v| v[k]).sum::<f64>() / p as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut v: Vec<f64> = (0..p)
                .map(|k| centroid[k] + t * (simplex[p][k] - centroid[k]))
                .collect();
            project(&mut v);
            v
        };

        let reflected = along(-1.0);
        let fr = f.objective(&reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f.objective(&expanded);
            if fe < fr {
                simplex[p] = expanded;
                values[p] = fe;
            } else {
                simplex[p] = reflected;
                values[p] = fr;
            }
            continue;
        }
        if fr < values[p - 1] {
            simplex[p] = reflected;
            values[p] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[p] {
            let c = along(-0.5);
            let fc = f.objective(&c);
            (c, fc)
        } else {
            let c = along(0.5);
            let fc = f.objective(&c);
            (c, fc)
        };
        if fc < values[p].min(fr) {
            simplex[p] = contracted;
            values[p] = fc;
            continue;
        }
        for i in 1..=p {
            let shrunk: Vec<f64> = (0..p)
                .map(|k| simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]))
                .collect();
            values[i] = f.objective(&shrunk);
            simplex[i] = shrunk;
        }
    }

    let best = (0..=p)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    (simplex[best].clone(), values[best], iterations, converged)
}

/// Central-difference Jacobian of the residuals in box coordinates.
fn jacobian<R: Residuals>(f: &mut Boxed<'_, R>, u: &[f64], m: usize) -> Option<DMatrix<f64>> {
    let p = u.len();
    let mut jac = DMatrix::zeros(m, p);
    for k in 0..p {
        let h = 1e-6 * u[k].abs().max(1e-3);
        let (mut up, mut dn) = (u.to_vec(), u.to_vec());
        // Stay inside the box: one-sided when against a wall.
        let (a, b) = ((u[k] - h).max(0.0), (u[k] + h).min(1.0));
        dn[k] = a;
        up[k] = b;
        if b <= a {
            continue;
        }
        let rp = f.residuals(&up)?;
        let rm = f.residuals(&dn)?;
        for i in 0..m {
            jac[(i, k)] = (rp[i] - rm[i]) / (b - a);
        }
    }
    Some(jac)
}

fn levenberg_marquardt<R: Residuals>(
    f: &mut Boxed<'_, R>,
    u_start: &[f64],
    f_start: f64,
    opts: &OptimOptions,
    history: &mut Vec<f64>,
) -> (Vec<f64>, f64, usize, bool) {
    let p = u_start.len();
    let mut u = u_start.to_vec();
    let mut fu = f_start;
    let mut r = match f.residuals(&u) {
        Some(r) => r,
        None => return (u, fu, 0, false),
    };
    let m = r.len();
    let mut mu = 1e-3;
    let mut iterations = 0;

    while iterations < opts.max_refine_iterations && f.evaluations < opts.max_evaluations {
        iterations += 1;
        let Some(jac) = jacobian(f, &u, m) else {
            return (u, fu, iterations, false);
        };
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * DVector::from_column_slice(&r);

        let mut accepted = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for k in 0..p {
                a[(k, k)] += mu * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&grad)) else {
                mu *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = (0..p).map(|k| u[k] + step[k]).collect();
            project(&mut trial);
            let moved = dist(&trial, &u);
            if moved <= opts.xtol {
                return (u, fu, iterations, true);
            }
            match f.residuals(&trial) {
                Some(rt) if sum_sq(&rt) < fu => {
                    let ft = sum_sq(&rt);
                    let decrease = (fu - ft) / fu.max(f64::MIN_POSITIVE);
                    u = trial;
                    r = rt;
                    fu = ft;
                    history.push(fu);
                    mu = (mu / 3.0).max(1e-12);
                    accepted = true;
                    if decrease < opts.ftol || moved <= opts.xtol {
                        return (u, fu, iterations, true);
                    }
                    break;
                }
                _ => mu *= 4.0,
            }
        }
        if !accepted {
            // No descent at any damping: at a (numerical) minimum.
            return (u, fu, iterations, true);
        }
        if fu == 0.0 {
            return (u, fu, iterations, true);
        }
    }
    (u, fu, iterations, false)
}

/// Central-difference Jacobian of the residuals in parameter units, with
/// step `1e-6 * max(|x|, 1e-3 * (hi - lo))` per coordinate.
pub fn central_jacobian<R: Residuals>(
    problem: &R,
    x: &[f64],
    lo: &[f64],
    hi: &[f64],
) -> Option<DMatrix<f64>> {
    let p = x.len();
    let r = problem.residuals(x)?;
    let mut jac = DMatrix::zeros(r.len(), p);
    for k in 0..p {
        let h = 1e-6 * x[k].abs().max(1e-3 * (hi[k] - lo[k]).max(1e-9));
        let (mut up, mut dn) = (x.to_vec(), x.to_vec());
        up[k] += h;
        dn[k] -= h;
        let rp = problem.residuals(&up)?;
        let rm = problem.residuals(&dn)?;
        for i in 0..r.len() {
            jac[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    Some(jac)
}

/// Standard errors `sqrt(diag(s^2 (J^T J)^-1))` with `s^2 = RSS / (m - p)`.
pub fn standard_errors<R: Residuals>(problem: &R, x: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let p = x.len();
    let nan = vec![f64::NAN; p];
    let Some(r) = problem.residuals(x) else {
        return nan;
    };
    let m = r.len();
    if m <= p {
        return nan;
    }
    let Some(jac) = central_jacobian(problem, x, lo, hi) else {
        return nan;
    };
    let s2 = sum_sq(&r) / (m - p) as f64;
    let jtj = jac.transpose() * &jac;
    match jtj.try_inverse() {
        Some(cov) => (0..p).map(|k| (s2 * cov[(k, k)]).max(0.0).sqrt()).collect(),
        None => nan,
    }
}
