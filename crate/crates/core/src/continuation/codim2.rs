use serde::{Deserialize, Serialize};

use crate::center_manifold;
use crate::linalg_bc;
use crate::numerics;
use crate::pws_map::{PwsMap, Side};
use crate::unfolding1d::{self, UnfoldingReport};

const SCAN_CELLS: usize = 2000;

/// Point on the `eta`-axis where one half-map's linear part has a `-1`
/// eigenvalue while the fixed point sits on the switching manifold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Codim2Point {
    pub eta: f64,
    /// Half whose fixed point period-doubles; for `R` the report describes
    /// the reflected map, in which that half becomes the left one.
    pub half: Side,
    pub report: Option<UnfoldingReport>,
    /// Why the unfolding could not be computed, if it could not.
    pub error: Option<String>,
}

/// Scans `eta_window` on the `eta`-axis for roots of `det(I + A_L(0, eta))`
/// and `det(I + A_R(0, eta))` and unfolds the map about each root.
pub fn detect_codim2(map: &PwsMap, eta_window: [f64; 2]) -> Vec<Codim2Point> {
    let mut out = Vec::new();
    for side in [Side::L, Side::R] {
        let det = |eta: f64| numerics::det_i_plus(&linalg_bc::linear_part(map.half(side), 0.0, eta));
        for eta in numerics::all_roots(det, eta_window[0], eta_window[1], SCAN_CELLS, 1e-15) {
            let eta = if eta.abs() < 1e-13 { 0.0 } else { eta };
            let local = match side {
                Side::L => map.shifted_eta(eta),
                Side::R => map.reflected().shifted_eta(eta),
            };
            let result = if local.dim() == 1 {
                unfolding1d::unfold(&local)
            } else {
                center_manifold::nd_unfold(&local).map(|u| u.report)
            };
            let (report, error) = match result {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            out.push(Codim2Point { eta, half: side, report, error });
        }
    }
    out.sort_by(|a, b| b.eta.total_cmp(&a.eta));
    out
}
