//! Comparing fields that live on different layouts.

use crate::error::Result;
use crate::fft::resample;
use crate::field::{Representation, WaveField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    /// `‖a − b‖/‖b‖`.
    pub relative: f64,
    /// `min_φ ‖a − e^{iφ}b‖/‖b‖`.
    pub aligned: f64,
    /// `|⟨a,b⟩|/(‖a‖‖b‖)`.
    pub overlap: f64,
}

/// Removes `e^{iβ|x|²}` and resamples onto `(representation, scale)`.
pub fn dechirp_onto(field: &WaveField, beta: f64, representation: Representation, scale: f64) -> Result<WaveField> {
    resample(&field.chirp(-beta), representation, scale)
}

/// Brings `field` to the unit-scale position layout, passing through the
/// slowly varying envelope `e^{−iβ|x|²}·field` so that a strong chirp does
/// not have to be resolved on the source nodes.
pub fn canonicalize(field: &WaveField, beta: f64) -> Result<WaveField> {
    if field.representation() == Representation::Position && field.scale() == 1.0 {
        return Ok(field.clone());
    }
    Ok(dechirp_onto(field, beta, Representation::Position, 1.0)?.chirp(beta))
}

/// Compares two fields representing functions of the same variable after
/// removing the reference chirp `β`; both are resampled onto the finer of
/// the two layouts.
pub fn compare_fields(a: &WaveField, b: &WaveField, beta: f64) -> Result<Comparison> {
    let target = if a.spacing().abs() <= b.spacing().abs() { a } else { b };
    let (rep, scale) = (target.representation(), target.scale());
    let a = dechirp_onto(a, beta, rep, scale)?;
    let b = dechirp_onto(b, beta, rep, scale)?;
    Ok(compare_same_layout(&a, &b)?)
}

pub fn compare_same_layout(a: &WaveField, b: &WaveField) -> Result<Comparison> {
    let nb = b.l2_norm();
    let na = a.l2_norm();
    let d = a.distance(b)?;
    let ip = b.inner(a)?;
    if nb == 0.0 {
        let v = if na == 0.0 { 0.0 } else { f64::INFINITY };
        return Ok(Comparison {
            relative: v,
            aligned: v,
            overlap: if na == 0.0 { 1.0 } else { 0.0 },
        });
    }
    let rotated = if ip.norm() > 0.0 {
        b.scaled(ip / ip.norm())
    } else {
        b.clone()
    };
    Ok(Comparison {
        relative: d / nb,
        aligned: a.distance(&rotated)? / nb,
        overlap: if na == 0.0 { 0.0 } else { ip.norm() / (na * nb) },
    })
}
