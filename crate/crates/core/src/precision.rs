//! Device coefficient ranges and fixed-point quantization.
//!
//! A device with `b` bits represents linear coefficients on the grid
//! `h_max * 2^-b * k` and couplers on `j_max * 2^-b * k`, `|k| <= 2^b`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IsingModel, Term};

/// Largest supported precision; at 53 bits the grid is the f64 mantissa.
pub const MAX_BITS: u32 = 53;

// Slack when checking normalized coefficients against the range bounds.
const RANGE_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceRanges {
    pub h_max: f64,
    pub j_max: f64,
}

impl Default for DeviceRanges {
    fn default() -> Self {
        Self { h_max: 2.0, j_max: 1.0 }
    }
}

impl DeviceRanges {
    pub fn new(h_max: f64, j_max: f64) -> Result<Self> {
        let r = Self { h_max, j_max };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.h_max) || !ok(self.j_max) {
            return Err(Error::InvalidArgument(format!(
                "device ranges must be positive, got h_max={} j_max={}",
                self.h_max, self.j_max
            )));
        }
        Ok(())
    }

    pub fn h_step(&self, bits: u32) -> f64 {
        grid_step(self.h_max, bits)
    }

    pub fn j_step(&self, bits: u32) -> f64 {
        grid_step(self.j_max, bits)
    }
}

pub fn grid_step(range: f64, bits: u32) -> f64 {
    range * (-(bits as f64)).exp2()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    /// Nearest grid level, ties away from zero.
    #[default]
    Nearest,
    /// Drop the fractional step (floor toward zero).
    TowardZero,
}

impl Rounding {
    fn apply(self, x: f64) -> f64 {
        match self {
            Rounding::Nearest => x.round(),
            Rounding::TowardZero => x.trunc(),
        }
    }
}

/// A device-ready model whose coefficients all sit on the `bits`-bit grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Qmi {
    pub model: IsingModel,
    pub bits: u32,
    pub ranges: DeviceRanges,
    /// Factor applied by [`normalize`] before quantization (1 if none).
    pub scale_applied: f64,
}

/// Scales `model` so every coefficient fits the device ranges.
///
/// Models already inside the ranges are returned unchanged with `s = 1`.
pub fn normalize(model: &IsingModel, ranges: DeviceRanges) -> Result<(IsingModel, f64)> {
    ranges.validate()?;
    let (mh, mj) = model.max_abs();
    let worst = (mh / ranges.h_max).max(mj / ranges.j_max).max(1.0);
    let s = 1.0 / worst;
    if s == 1.0 {
        return Ok((model.clone(), 1.0));
    }
    Ok((model.scale(s)?, s))
}

fn check_bits(bits: u32) -> Result<()> {
    if bits == 0 || bits > MAX_BITS {
        return Err(Error::InvalidArgument(format!(
            "precision must be in 1..={MAX_BITS} bits, got {bits}"
        )));
    }
    Ok(())
}

/// Snaps one coefficient in `[-max, max]` onto the grid of step `max * 2^-bits`.
pub fn quantize_value(x: f64, max: f64, bits: u32, rounding: Rounding) -> Result<f64> {
    if !(x.abs() <= max * (1.0 + RANGE_SLACK)) {
        return Err(Error::RangeViolation { value: x, max });
    }
    let step = grid_step(max, bits);
    let q = rounding.apply(x / step) * step;
    Ok(q.clamp(-max, max))
}

pub fn quantize(model: &IsingModel, bits: u32, ranges: DeviceRanges) -> Result<Qmi> {
    quantize_with(model, bits, ranges, Rounding::Nearest)
}

pub fn quantize_with(
    model: &IsingModel,
    bits: u32,
    ranges: DeviceRanges,
    rounding: Rounding,
) -> Result<Qmi> {
    check_bits(bits)?;
    ranges.validate()?;
    let mut err = None;
    let q = model.map_coefficients(|term, v| {
        let max = match term {
            Term::Linear(_) => ranges.h_max,
            Term::Coupler(..) => ranges.j_max,
        };
        quantize_value(v, max, bits, rounding).unwrap_or_else(|e| {
            err.get_or_insert(e);
            0.0
        })
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(Qmi {
        model: q,
        bits,
        ranges,
        scale_applied: 1.0,
    })
}

/// Normalizes into the device ranges, then quantizes.
pub fn prepare(model: &IsingModel, bits: u32, ranges: DeviceRanges) -> Result<Qmi> {
    let (normalized, s) = normalize(model, ranges)?;
    let mut qmi = quantize(&normalized, bits, ranges)?;
    qmi.scale_applied = s;
    Ok(qmi)
}

/// Largest per-coefficient change made by quantization.
pub fn quantization_error(model: &IsingModel, bits: u32, ranges: DeviceRanges) -> Result<f64> {
    let q = quantize(model, bits, ranges)?;
    let dh = model
        .linear()
        .iter()
        .map(|(i, v)| (q.model.h(*i) - v).abs());
    let dj = model
        .quadratic()
        .iter()
        .map(|(&(a, b), v)| (q.model.coupling(a, b) - v).abs());
    Ok(dh.chain(dj).fold(0.0, f64::max))
}

impl Qmi {
    /// True when every coefficient lies on this QMI's grid and inside its ranges.
    pub fn is_on_grid(&self) -> bool {
        let on = |v: f64, max: f64| {
            let k = v / grid_step(max, self.bits);
            v.abs() <= max && k == k.round()
        };
        self.model.linear().values().all(|&v| on(v, self.ranges.h_max))
            && self.model.quadratic().values().all(|&v| on(v, self.ranges.j_max))
    }
}
