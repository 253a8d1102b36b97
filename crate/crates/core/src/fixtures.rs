//! Built-in example maps.

use crate::poly::Poly2;
use crate::pws_map::{HalfMap, PwsMap};

/// Scalar map with `b = 1`, `a_L = eta - 1`, `a_R = 3/2`, `p = -1`, `q = 3/2`.
///
/// The quadratic and cubic terms act on the left only; the right half-map is
/// affine.
pub fn fig2() -> PwsMap {
    let b = Poly2::constant(1.0);
    let left = HalfMap::one_d(
        b.clone(),
        Poly2::from_terms(&[(0, 0, -1.0), (0, 1, 1.0)]),
        Poly2::constant(-1.0),
        Poly2::constant(1.5),
    );
    let right = HalfMap::one_d(b, Poly2::constant(1.5), Poly2::default(), Poly2::default());
    PwsMap::new(left, right).expect("fixture is continuous")
}

/// Planar map
///
/// ```text
/// s' = -s/2 + y - mu/2
/// y' = (1/3 - 3 eta/2) s - |s|/6 + s^2/4
/// ```
///
/// with `|s|` expanded into the linear coefficient of each half.
pub fn pdmapex() -> PwsMap {
    let half = |a10: f64| {
        let mut h = HalfMap::zero(2);
        h.set_b(0, Poly2::constant(-0.5));
        h.set_a(0, 0, Poly2::constant(-0.5));
        h.set_a(0, 1, Poly2::constant(1.0));
        h.set_a(1, 0, Poly2::from_terms(&[(0, 0, a10), (0, 1, -1.5)]));
        h.set_nonlinear(1, vec![2, 0], Poly2::constant(0.25)).expect("quadratic monomial");
        h
    };
    PwsMap::new(half(0.5), half(1.0 / 6.0)).expect("fixture is continuous")
}

/// Looks up a built-in map by name.
pub fn builtin(name: &str) -> Option<PwsMap> {
    match name {
        "fig2" => Some(fig2()),
        "pdmapex" => Some(pdmapex()),
        _ => None,
    }
}

pub const BUILTIN_NAMES: &[&str] = &["fig2", "pdmapex"];
