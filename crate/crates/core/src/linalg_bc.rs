//! Fixed points of the half-maps, the adjugate row `rho^T`, and Feigin's
//! classification of the border-collision at `mu = 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, NewtonOptions};
use crate::pws_map::{HalfMap, PwsMap, Side, State};

/// Eigenvalue threshold for counting and degeneracy flags.
pub const EIG_TOL: f64 = 1e-8;

/// A complex eigenvalue in serializable form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub re: f64,
    pub im: f64,
}

impl Multiplier {
    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn is_real(&self) -> bool {
        self.im.abs() <= 1e-12 * (1.0 + self.re.abs())
    }
}

/// Eigenvalues sorted by real part then imaginary part.
pub fn multipliers(m: &DMatrix<f64>) -> Vec<Multiplier> {
    let mut out: Vec<Multiplier> = numerics::eigenvalues(m)
        .into_iter()
        .map(|c| Multiplier { re: c.re, im: c.im })
        .collect();
    out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub x_star: State,
    pub s_star: f64,
    pub side: Side,
    pub admissible: bool,
    pub multipliers: Vec<Multiplier>,
    pub residual: f64,
}

fn cofactor_adjugate(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    let mut adj = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let minor = m.clone().remove_row(i).remove_column(j);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            adj[(j, i)] = sign * minor.determinant();
        }
    }
    adj
}

/// Classical adjugate, `adj(M) M = det(M) I`. A `1 x 1` matrix has adjugate `[1]`.
pub fn adjugate(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(m.is_square(), "adjugate of a non-square matrix");
    let n = m.nrows();
    if n <= 4 {
        return cofactor_adjugate(m);
    }
    let det = m.determinant();
    let scale = m.amax().max(1.0).powi(n as i32);
    if det.abs() > 1e-6 * scale {
        if let Some(inv) = m.clone().try_inverse() {
            return inv * det;
        }
    }
    cofactor_adjugate(m)
}

fn check_shared_columns(a_l: &DMatrix<f64>, a_r: &DMatrix<f64>) -> Result<()> {
    let n = a_l.nrows();
    let mut bad = Vec::new();
    for i in 0..n {
        for j in 1..n {
            if (a_l[(i, j)] - a_r[(i, j)]).abs() > 1e-12 * (1.0 + a_l[(i, j)].abs()) {
                bad.push(format!("a[{i}][{j}]"));
            }
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::ContinuityViolation { monomials: bad })
    }
}

/// `rho^T = e_1^T adj(I - A_L)`, checked against `e_1^T adj(I - A_R)`.
pub fn varrho(a_l: &DMatrix<f64>, a_r: &DMatrix<f64>) -> Result<DVector<f64>> {
    if a_l.shape() != a_r.shape() {
        return Err(Error::DimensionMismatch {
            expected: a_l.nrows(),
            got: a_r.nrows(),
        });
    }
    check_shared_columns(a_l, a_r)?;
    let n = a_l.nrows();
    let id = DMatrix::identity(n, n);
    let rl = adjugate(&(&id - a_l)).row(0).transpose();
    let rr = adjugate(&(&id - a_r)).row(0).transpose();
    let gap = (&rl - &rr).amax();
    if gap > 1e-10 * (1.0 + rl.amax()) {
        return Err(Error::Config(format!("adjugate rows of I - A_L and I - A_R differ by {gap:.3e}")));
    }
    Ok(rl)
}

/// `A(mu, eta)` of a half-map.
pub fn linear_part(half: &HalfMap, mu: f64, eta: f64) -> DMatrix<f64> {
    let n = half.dim();
    DMatrix::from_fn(n, n, |i, j| half.a(i, j).eval(mu, eta))
}

/// `b(mu, eta)` (shared by both halves).
pub fn offset_direction(half: &HalfMap, mu: f64, eta: f64) -> DVector<f64> {
    DVector::from_iterator(half.dim(), (0..half.dim()).map(|i| half.b(i).eval(mu, eta)))
}

fn unit_eigen_distance(a: &DMatrix<f64>, target: f64) -> f64 {
    numerics::eigenvalues(a)
        .iter()
        .map(|c| (c.re - target).hypot(c.im))
        .fold(f64::INFINITY, f64::min)
}

/// Admissible or virtual fixed point of one half-map, refined by Newton.
pub fn half_fixed_point(half: &HalfMap, side: Side, mu: f64, eta: f64) -> Result<FixedPointResult> {
    let a0 = linear_part(half, 0.0, eta);
    let distance = unit_eigen_distance(&a0, 1.0);
    if distance <= EIG_TOL {
        return Err(Error::SingularLinearization { distance });
    }
    let frozen = half.freeze(mu, eta);
    let n = half.dim();
    let id = DMatrix::<f64>::identity(n, n);
    let seed = numerics::solve(&(&id - &a0), &(offset_direction(half, 0.0, eta) * mu)).unwrap_or_else(|| DVector::zeros(n));
    let sol = numerics::newton(seed, NewtonOptions::default(), "fixed-point Newton", |x| {
        (frozen.eval(x) - x, frozen.jacobian(x) - &id)
    })?;
    let x = sol.x;
    let residual = (frozen.eval(&x) - &x).amax();
    let s = x[0];
    Ok(FixedPointResult {
        multipliers: multipliers(&frozen.jacobian(&x)),
        admissible: side.admits(s),
        s_star: s,
        x_star: x,
        side,
        residual,
    })
}

/// Leading slope `d s*/d mu` at the origin: `rho^T b / det(I - A)` at `(0, 0)`.
pub fn s_star_slope(half: &HalfMap, _side: Side) -> Result<f64> {
    let a = linear_part(half, 0.0, 0.0);
    let n = a.nrows();
    let i_minus = DMatrix::identity(n, n) - &a;
    let det = i_minus.determinant();
    if det.abs() <= EIG_TOL {
        return Err(Error::SingularLinearization { distance: det.abs() });
    }
    let rho = adjugate(&i_minus).row(0).transpose();
    Ok(rho.dot(&offset_direction(half, 0.0, 0.0)) / det)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixedPointScenario {
    Persistence,
    NonsmoothFold,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeiginReport {
    pub eta: f64,
    pub sigma_plus_l: usize,
    pub sigma_plus_r: usize,
    pub sigma_minus_l: usize,
    pub sigma_minus_r: usize,
    pub fixed_point_scenario: FixedPointScenario,
    pub two_cycle_exists: bool,
    pub degenerate_flags: Vec<String>,
}

fn count_beyond(a: &DMatrix<f64>) -> (usize, usize, bool) {
    let mut plus = 0;
    let mut minus = 0;
    let mut near = false;
    for c in numerics::eigenvalues(a) {
        let d_plus = (c.re - 1.0).hypot(c.im);
        let d_minus = (c.re + 1.0).hypot(c.im);
        if d_plus <= EIG_TOL || d_minus <= EIG_TOL {
            near = true;
        }
        if c.im.abs() <= 1e-12 * (1.0 + c.re.abs()) {
            if c.re > 1.0 + EIG_TOL {
                plus += 1;
            } else if c.re < -1.0 - EIG_TOL {
                minus += 1;
            }
        }
    }
    (plus, minus, near)
}

/// Feigin's classification of the border-collision at `mu = 0` for fixed `eta`.
pub fn feigin_classify(map: &PwsMap, eta: f64) -> FeiginReport {
    let a_l = linear_part(map.left(), 0.0, eta);
    let a_r = linear_part(map.right(), 0.0, eta);
    let n = a_l.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let (pl, ml, near_l) = count_beyond(&a_l);
    let (pr, mr, near_r) = count_beyond(&a_r);
    let mut flags = Vec::new();
    if near_l {
        flags.push("A_L has an eigenvalue within 1e-8 of +1 or -1".to_string());
    }
    if near_r {
        flags.push("A_R has an eigenvalue within 1e-8 of +1 or -1".to_string());
    }
    if (&id - &a_l).determinant().abs() <= EIG_TOL {
        flags.push("I - A_L singular".to_string());
    }
    if (&id - &a_r).determinant().abs() <= EIG_TOL {
        flags.push("I - A_R singular".to_string());
    }
    if (&id - &a_l * &a_r).determinant().abs() <= EIG_TOL {
        flags.push("I - A_L A_R singular".to_string());
    }
    let rho = adjugate(&(&id - &a_l)).row(0).transpose();
    let rho_b = rho.dot(&offset_direction(map.left(), 0.0, eta));
    if rho_b.abs() <= EIG_TOL {
        flags.push("rho^T b = 0".to_string());
    }
    FeiginReport {
        eta,
        sigma_plus_l: pl,
        sigma_plus_r: pr,
        sigma_minus_l: ml,
        sigma_minus_r: mr,
        fixed_point_scenario: if (pl + pr) % 2 == 0 {
            FixedPointScenario::Persistence
        } else {
            FixedPointScenario::NonsmoothFold
        },
        two_cycle_exists: (ml + mr) % 2 == 1,
        degenerate_flags: flags,
    }
}
