//! Small numerical kernels shared by the analysis modules.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Outcome of a converged Newton solve.
#[derive(Clone, Debug)]
pub struct NewtonSolution {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Largest accepted step in the max norm; longer steps are scaled down.
    pub max_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 50,
            max_step: f64::INFINITY,
        }
    }
}

/// Newton's method with residual backtracking.
///
/// `system` returns the residual and its Jacobian at a point. Convergence is
/// declared once the max-norm residual drops below `opts.tol`.
pub fn newton<F>(x0: DVector<f64>, opts: NewtonOptions, what: &'static str, mut system: F) -> Result<NewtonSolution>
where
    F: FnMut(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let mut x = x0;
    let (mut r, mut j) = system(&x);
    let mut norm = r.amax();
    for it in 0..opts.max_iter {
        if !norm.is_finite() {
            break;
        }
        if norm <= opts.tol {
            return Ok(NewtonSolution {
                x,
                iterations: it,
                residual: norm,
            });
        }
        let Some(mut dx) = solve(&j, &r) else {
            return Err(Error::NoConvergence {
                what,
                iterations: it,
                residual: norm,
            });
        };
        let len = dx.amax();
        if len > opts.max_step {
            dx *= opts.max_step / len;
        }
        let mut t = 1.0;
        loop {
            let trial = &x - &dx * t;
            let (rt, jt) = system(&trial);
            let nt = rt.amax();
            if nt.is_finite() && (nt < norm || t < 1.0 / 64.0) {
                x = trial;
                r = rt;
                j = jt;
                norm = nt;
                break;
            }
            t *= 0.5;
        }
    }
    if norm <= opts.tol {
        return Ok(NewtonSolution {
            x,
            iterations: opts.max_iter,
            residual: norm,
        });
    }
    Err(Error::NoConvergence {
        what,
        iterations: opts.max_iter,
        residual: norm,
    })
}

/// Solves `m x = rhs`; `None` when `m` is numerically singular.
pub fn solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let x = m.clone().lu().solve(rhs)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Forward-difference Jacobian of `f` at `x`.
pub fn fd_jacobian<F>(f: &mut F, x: &DVector<f64>, fx: &DVector<f64>) -> DMatrix<f64>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let mut j = DMatrix::zeros(fx.len(), x.len());
    for k in 0..x.len() {
        let h = 1e-7 * (1.0 + x[k].abs());
        let mut xp = x.clone();
        xp[k] += h;
        let col = (f(&xp) - fx) / h;
        j.set_column(k, &col);
    }
    j
}

/// Central-difference Jacobian of `f` at `x`.
pub fn central_jacobian<F>(f: &mut F, x: &DVector<f64>, m: usize) -> DMatrix<f64>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let mut j = DMatrix::zeros(m, x.len());
    for k in 0..x.len() {
        let h = 1e-6 * (1.0 + x[k].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        let col = (f(&xp) - f(&xm)) / (2.0 * h);
        j.set_column(k, &col);
    }
    j
}

/// Root of `f` in `[a, b]` where `f(a)` and `f(b)` have opposite signs.
///
/// Illinois-modified regula falsi, falling back to bisection when progress
/// stalls. Stops when the bracket is narrower than `xtol` or `f` vanishes.
pub fn bracketed_root<F>(mut f: F, a: f64, b: f64, xtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::NoConvergence {
            what: "bracketed root (no sign change)",
            iterations: 0,
            residual: fa.abs().min(fb.abs()),
        });
    }
    let mut side = 0i8;
    for it in 0..200 {
        let width = (b - a).abs();
        if width <= xtol {
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !c.is_finite() || (c - a).abs() < 0.01 * width || (b - c).abs() < 0.01 * width || it % 4 == 3 {
            c = 0.5 * (a + b);
        }
        let fc = f(c);
        if fc == 0.0 {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Err(Error::NoConvergence {
        what: "bracketed root",
        iterations: 200,
        residual: fa.abs().min(fb.abs()),
    })
}

/// Scans `[a, b]` with `n` equal cells and refines every sign change of `f`.
pub fn all_roots<F>(mut f: F, a: f64, b: f64, n: usize, xtol: f64) -> Vec<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut roots = Vec::new();
    let mut x0 = a;
    let mut f0 = f(a);
    if f0 == 0.0 {
        roots.push(a);
    }
    for k in 1..=n {
        let x1 = a + (b - a) * k as f64 / n as f64;
        let f1 = f(x1);
        if f1 == 0.0 {
            roots.push(x1);
        } else if f0 != 0.0 && f0.signum() != f1.signum() {
            if let Ok(r) = bracketed_root(&mut f, x0, x1, xtol) {
                roots.push(r);
            }
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

/// Unit vector spanning the (numerical) kernel of an `m x (m+1)` or square matrix.
pub fn null_vector(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.ncols();
    let mut sq = DMatrix::zeros(n.max(m.nrows()), n);
    sq.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    vt.row(k).transpose()
}

/// Smallest singular value of a square matrix.
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if m.nrows() == 1 {
        return vec![Complex::new(m[(0, 0)], 0.0)];
    }
    m.complex_eigenvalues().iter().copied().collect()
}

/// Right eigenvector for a real eigenvalue, as the kernel of `m - lambda I`.
pub fn real_eigenvector(m: &DMatrix<f64>, lambda: f64) -> DVector<f64> {
    let n = m.nrows();
    null_vector(&(m - DMatrix::identity(n, n) * lambda))
}

/// Determinant of `I - m`.
pub fn det_i_minus(m: &DMatrix<f64>) -> f64 {
    (DMatrix::identity(m.nrows(), m.ncols()) - m).determinant()
}

/// Determinant of `I + m`.
pub fn det_i_plus(m: &DMatrix<f64>) -> f64 {
    (DMatrix::identity(m.nrows(), m.ncols()) + m).determinant()
}

/// Least-squares slope of `log|y|` against `log|x|`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.abs().ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Least-squares fit of `y = c1 x + c2 x^2 + c3 x^3`, returning `[c1, c2, c3]`.
pub fn fit_cubic_through_origin(xs: &[f64], ys: &[f64]) -> [f64; 3] {
    let a = DMatrix::from_fn(xs.len(), 3, |i, j| xs[i].powi(j as i32 + 1));
    let y = DVector::from_column_slice(ys);
    let sol = a.svd(true, true).solve(&y, 1e-14).expect("least-squares solve");
    [sol[0], sol[1], sol[2]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_finds_sqrt_two() {
        let sol = newton(DVector::from_element(1, 1.0), NewtonOptions::default(), "test", |x| {
            (DVector::from_element(1, x[0] * x[0] - 2.0), DMatrix::from_element(1, 1, 2.0 * x[0]))
        })
        .unwrap();
        assert!((sol.x[0] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn newton_reports_failure() {
        let err = newton(DVector::from_element(1, 1.0), NewtonOptions::default(), "test", |x| {
            (DVector::from_element(1, x[0] * x[0] + 1.0), DMatrix::from_element(1, 1, 2.0 * x[0]))
        })
        .unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn bracketed_root_cubic() {
        let r = bracketed_root(|x| x * x * x - x - 2.0, 1.0, 2.0, 1e-14).unwrap();
        assert!((r * r * r - r - 2.0).abs() < 1e-12);
        assert!(bracketed_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn all_roots_of_quadratic() {
        let roots = all_roots(|x| (x - 0.3) * (x + 0.7), -1.0, 1.0, 37, 1e-14);
        assert_eq!(roots.len(), 2);
        assert!((roots[0] + 0.7).abs() < 1e-12 && (roots[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn null_vector_of_wide_matrix() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 0.0, 1.0, -1.0]);
        let v = null_vector(&m);
        assert!((&m * &v).amax() < 1e-12);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_helpers() {
        let m = DMatrix::from_row_slice(2, 2, &[-0.5, 1.0, 0.5, 0.0]);
        let mut ev: Vec<f64> = eigenvalues(&m).iter().map(|c| c.re).collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + 1.0).abs() < 1e-12 && (ev[1] - 0.5).abs() < 1e-12);
        let v = real_eigenvector(&m, -1.0);
        assert!((&m * &v + &v).amax() < 1e-12);
    }

    #[test]
    fn slope_and_fit() {
        let xs = [1e-3, 1e-2, 1e-1];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 5.0 * x.powi(3)).collect();
        assert!((log_log_slope(&xs, &ys) - 3.0).abs() < 1e-12);
        let xs: Vec<f64> = (1..10).map(|k| k as f64 * 0.01).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 0.5 * x * x + 0.1 * x * x * x).collect();
        let c = fit_cubic_through_origin(&xs, &ys);
        assert!((c[0] - 2.0).abs() < 1e-9 && (c[1] + 0.5).abs() < 1e-7);
    }
}
