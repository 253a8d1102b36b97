//! TOML map definitions.
//!
//! ```toml
//! dimension = 1
//! escape_radius = 1000.0        # optional
//!
//! [left]
//! b = { "00" = 1.0 }
//! a = { "00" = -1.0, "01" = 1.0 }
//! p = { "00" = -1.0 }
//! q = { "00" = 1.5 }
//!
//! [right]
//! b = { "00" = 1.0 }
//! a = { "00" = 1.5 }
//! ```
//!
//! Polynomial tables map a two-digit key `"ij"` to the coefficient of
//! `mu^i eta^j`. In `N` dimensions `b` is an array of tables, `a` an array of
//! rows, and nonlinear monomials are listed under `nonlinear` with keys
//! `"k:e1e2..en"` (output index, then one exponent digit per state variable):
//!
//! ```toml
//! dimension = 2
//! [left]
//! b = [{ "00" = -0.5 }, {}]
//! a = [[{ "00" = -0.5 }, { "00" = 1.0 }],
//!      [{ "00" = 0.5, "01" = -1.5 }, {}]]
//! nonlinear = { "1:20" = { "00" = 0.25 } }
//! ```
//!
//! Unknown keys are rejected and the continuity of the two halves is checked
//! on load.

use std::fmt::Write as _;
use std::path::Path;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::poly::Poly2;
use crate::pws_map::{HalfMap, PwsMap};

fn cfg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

fn number(v: &Value, ctx: &str) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => cfg(format!("{ctx}: expected a number")),
    }
}

fn parse_poly(v: &Value, ctx: &str) -> Result<Poly2> {
    let Value::Table(t) = v else {
        return cfg(format!("{ctx}: expected a table of coefficients"));
    };
    let mut terms = Vec::new();
    for (key, val) in t {
        let digits: Vec<u32> = key.chars().filter_map(|c| c.to_digit(10)).collect();
        if digits.len() != 2 || key.len() != 2 {
            return cfg(format!("{ctx}: coefficient key {key:?} must be two digits \"ij\" (mu^i eta^j)"));
        }
        terms.push((digits[0] as usize, digits[1] as usize, number(val, &format!("{ctx}.{key}"))?));
    }
    Ok(Poly2::from_terms(&terms))
}

fn reject_unknown(t: &Table, allowed: &[&str], ctx: &str) -> Result<()> {
    for k in t.keys() {
        if !allowed.contains(&k.as_str()) {
            return cfg(format!("{ctx}: unknown key {k:?} (allowed: {})", allowed.join(", ")));
        }
    }
    Ok(())
}

fn parse_half_1d(t: &Table, ctx: &str) -> Result<HalfMap> {
    reject_unknown(t, &["b", "a", "p", "q"], ctx)?;
    let get = |k: &str| -> Result<Poly2> {
        match t.get(k) {
            Some(v) => parse_poly(v, &format!("{ctx}.{k}")),
            None => Ok(Poly2::default()),
        }
    };
    Ok(HalfMap::one_d(get("b")?, get("a")?, get("p")?, get("q")?))
}

fn array<'a>(v: Option<&'a Value>, len: usize, ctx: &str) -> Result<Vec<Option<&'a Value>>> {
    match v {
        None => Ok(vec![None; len]),
        Some(Value::Array(a)) if a.len() == len => Ok(a.iter().map(Some).collect()),
        Some(Value::Array(a)) => Err(Error::DimensionMismatch {
            expected: len,
            got: a.len(),
        })
        .map_err(|e| Error::Config(format!("{ctx}: {e}"))),
        Some(_) => cfg(format!("{ctx}: expected an array of length {len}")),
    }
}

fn parse_half_nd(t: &Table, n: usize, ctx: &str) -> Result<HalfMap> {
    reject_unknown(t, &["b", "a", "nonlinear"], ctx)?;
    let mut h = HalfMap::zero(n);
    for (i, v) in array(t.get("b"), n, &format!("{ctx}.b"))?.into_iter().enumerate() {
        if let Some(v) = v {
            h.set_b(i, parse_poly(v, &format!("{ctx}.b[{i}]"))?);
        }
    }
    for (i, row) in array(t.get("a"), n, &format!("{ctx}.a"))?.into_iter().enumerate() {
        for (j, v) in array(row, n, &format!("{ctx}.a[{i}]"))?.into_iter().enumerate() {
            if let Some(v) = v {
                h.set_a(i, j, parse_poly(v, &format!("{ctx}.a[{i}][{j}]"))?);
            }
        }
    }
    if let Some(v) = t.get("nonlinear") {
        let Value::Table(nl) = v else {
            return cfg(format!("{ctx}.nonlinear: expected a table"));
        };
        for (key, val) in nl {
            let bad = || Error::Config(format!("{ctx}.nonlinear: key {key:?} must look like \"k:e1..e{n}\""));
            let (out, exps) = key.split_once(':').ok_or_else(bad)?;
            let out: usize = out.parse().map_err(|_| bad())?;
            let exps: Vec<u8> = exps.chars().map(|c| c.to_digit(10).map(|d| d as u8)).collect::<Option<_>>().ok_or_else(bad)?;
            if out >= n || exps.len() != n {
                return Err(bad());
            }
            h.set_nonlinear(out, exps, parse_poly(val, &format!("{ctx}.nonlinear.{key}"))?)?;
        }
    }
    Ok(h)
}

/// Parses a map definition from TOML text.
pub fn parse(text: &str) -> Result<PwsMap> {
    let doc: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(format!("invalid map file: {e}")))?;
    reject_unknown(&doc, &["dimension", "escape_radius", "left", "right"], "map")?;
    let n = match doc.get("dimension") {
        Some(Value::Integer(n)) if *n >= 1 => *n as usize,
        Some(_) => return cfg("map.dimension: expected a positive integer"),
        None => return cfg("map.dimension is required"),
    };
    let half = |name: &str| -> Result<HalfMap> {
        let Some(Value::Table(t)) = doc.get(name) else {
            return cfg(format!("map.{name}: missing section"));
        };
        if n == 1 {
            parse_half_1d(t, name)
        } else {
            parse_half_nd(t, n, name)
        }
    };
    let mut map = PwsMap::new(half("left")?, half("right")?)?;
    if let Some(v) = doc.get("escape_radius") {
        let r = number(v, "map.escape_radius")?;
        if !(r > 0.0) {
            return cfg("map.escape_radius must be positive");
        }
        map = map.with_escape_radius(r);
    }
    Ok(map)
}

pub fn load(path: &Path) -> Result<PwsMap> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

fn poly_toml(p: &Poly2) -> String {
    let items: Vec<String> = p
        .terms()
        .filter(|&(_, _, c)| c != 0.0)
        .map(|(i, j, c)| format!("\"{i}{j}\" = {c:?}"))
        .collect();
    format!("{{ {} }}", items.join(", "))
}

/// Renders a map in the format accepted by [`parse`].
pub fn to_toml(map: &PwsMap) -> String {
    let n = map.dim();
    let mut out = format!("dimension = {n}\nescape_radius = {:?}\n", map.escape_radius());
    for (name, h) in [("left", map.left()), ("right", map.right())] {
        let _ = writeln!(out, "\n[{name}]");
        if let Some((b, a, p, q)) = h.as_1d() {
            for (k, poly) in [("b", b), ("a", a), ("p", p), ("q", q)] {
                let _ = writeln!(out, "{k} = {}", poly_toml(&poly));
            }
            continue;
        }
        let bs: Vec<String> = (0..n).map(|i| poly_toml(h.b(i))).collect();
        let _ = writeln!(out, "b = [{}]", bs.join(", "));
        let rows: Vec<String> = (0..n)
            .map(|i| format!("[{}]", (0..n).map(|j| poly_toml(h.a(i, j))).collect::<Vec<_>>().join(", ")))
            .collect();
        let _ = writeln!(out, "a = [{}]", rows.join(",\n     "));
        let mut nl = Vec::new();
        for i in 0..n {
            for (m, p) in h.nonlinear(i) {
                let e: String = m.iter().map(|d| d.to_string()).collect();
                nl.push(format!("\"{i}:{e}\" = {}", poly_toml(p)));
            }
        }
        let _ = writeln!(out, "nonlinear = {{ {} }}", nl.join(", "));
    }
    out
}
