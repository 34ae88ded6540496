//! JSON output with controlled number text.
//!
//! serde_json prints floats in shortest form but switches to exponent
//! notation for very small or large magnitudes. Every file written here uses
//! plain decimal notation instead.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Floats {
    /// Shortest decimal that parses back to the identical `f64`.
    Exact,
    /// Rounded to this many significant digits.
    Significant(usize),
}

pub fn format_f64(value: f64, floats: Floats) -> String {
    match floats {
        Floats::Exact => format!("{value}"),
        Floats::Significant(digits) => significant(value, digits),
    }
}

fn significant(value: f64, digits: usize) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let fixed = |exp: i32| {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{value:.decimals$}")
    };
    let exp = value.abs().log10().floor() as i32;
    let text = fixed(exp);
    // Rounding up can carry into a new leading digit (9.99… -> 10.0…).
    let carried = text.parse::<f64>().is_ok_and(|r| r.abs() >= 10f64.powi(exp + 1));
    if carried {
        fixed(exp + 1)
    } else {
        text
    }
}

struct DecimalFormatter(Floats);

impl Formatter for DecimalFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value, self.0).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Compact JSON text without a trailing newline.
pub fn to_string<T: Serialize + ?Sized>(value: &T, floats: Floats) -> Result<String, CliError> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, DecimalFormatter(floats));
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Data(format!("serialization failed: {e}")))?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

/// A complete JSON file: one object followed by a newline.
pub fn to_file_bytes<T: Serialize + ?Sized>(value: &T, floats: Floats) -> Result<Vec<u8>, CliError> {
    let mut text = to_string(value, floats)?;
    text.push('\n');
    Ok(text.into_bytes())
}
