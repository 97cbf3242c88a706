//! Coercion of single fields into typed values.
//!
//! Every coercion is total: a field either yields a value, is the null token
//! (`NA`), or is invalid. Empty fields are invalid for every type.

use num_complex::Complex64;

use super::ColumnType;

/// A typed value produced by [`parse_field`].
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Logical(bool),
    Integer(i64),
    Real(f64),
    Character(Vec<u8>),
    Bytes(Vec<u8>),
    Complex(Complex64),
    Timestamp(f64),
}

/// Outcome of coercing one field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Coerced<'a> {
    /// The explicit null token.
    Na,
    /// Empty or unparseable; stored as null and counted.
    Invalid,
    Logical(bool),
    Integer(i64),
    Real(f64),
    Text(&'a [u8]),
    Complex(Complex64),
    Timestamp(f64),
}

pub(crate) const NA: &[u8] = b"NA";

/// Coerces a field. `quoted` fields are never the null token. Bytes columns
/// are decoded by the caller, so they come back as `Text`.
#[inline]
pub(crate) fn coerce(field: &[u8], ty: ColumnType, quoted: bool) -> Coerced<'_> {
    if !quoted && field == NA {
        return Coerced::Na;
    }
    let parsed = match ty {
        ColumnType::Character | ColumnType::Bytes => {
            if field.is_empty() && !quoted {
                None
            } else {
                Some(Coerced::Text(field))
            }
        }
        ColumnType::Logical => parse_logical(field).map(Coerced::Logical),
        ColumnType::Integer => parse_int(field).map(Coerced::Integer),
        ColumnType::Real => parse_real(field).map(Coerced::Real),
        ColumnType::Complex => parse_complex(field).map(Coerced::Complex),
        ColumnType::Timestamp => parse_timestamp(field).map(Coerced::Timestamp),
        ColumnType::Skip => None,
    };
    parsed.unwrap_or(Coerced::Invalid)
}

/// Parses one separator-free field. Returns `None` for nulls and for fields
/// that do not parse as `ty`.
pub fn parse_field(field: &[u8], ty: ColumnType) -> Option<Value> {
    match coerce(field, ty, false) {
        Coerced::Na | Coerced::Invalid => None,
        Coerced::Logical(b) => Some(Value::Logical(b)),
        Coerced::Integer(i) => Some(Value::Integer(i)),
        Coerced::Real(x) => Some(Value::Real(x)),
        Coerced::Complex(z) => Some(Value::Complex(z)),
        Coerced::Timestamp(t) => Some(Value::Timestamp(t)),
        Coerced::Text(t) if ty == ColumnType::Bytes => {
            let mut out = Vec::with_capacity(t.len() / 2);
            decode_hex_into(t, &mut out).then_some(Value::Bytes(out))
        }
        Coerced::Text(t) => Some(Value::Character(t.to_vec())),
    }
}

#[inline]
pub(crate) fn parse_logical(field: &[u8]) -> Option<bool> {
    match field {
        b"TRUE" | b"T" => Some(true),
        b"FALSE" | b"F" => Some(false),
        _ => None,
    }
}

/// Decimal integer with optional sign; `None` on overflow of `i64`.
#[inline]
pub(crate) fn parse_int(field: &[u8]) -> Option<i64> {
    let (negative, digits) = match field.first()? {
        b'-' => (true, &field[1..]),
        b'+' => (false, &field[1..]),
        _ => (false, field),
    };
    if digits.is_empty() {
        return None;
    }
    // Accumulate negatively so i64::MIN is representable.
    let mut acc: i64 = 0;
    for &b in digits {
        let d = b.wrapping_sub(b'0');
        if d > 9 {
            return None;
        }
        acc = acc.checked_mul(10)?.checked_sub(i64::from(d))?;
    }
    if negative {
        Some(acc)
    } else {
        acc.checked_neg()
    }
}

#[inline]
pub(crate) fn parse_real(field: &[u8]) -> Option<f64> {
    match field {
        b"NaN" => return Some(f64::NAN),
        b"Inf" | b"+Inf" => return Some(f64::INFINITY),
        b"-Inf" => return Some(f64::NEG_INFINITY),
        _ => {}
    }
    let mut digits = false;
    for &b in field {
        match b {
            b'0'..=b'9' => digits = true,
            b'+' | b'-' | b'.' | b'e' | b'E' => {}
            _ => return None,
        }
    }
    if !digits {
        return None;
    }
    std::str::from_utf8(field).ok()?.parse().ok()
}

/// `<re>+<im>i`, `<re>-<im>i`, `<im>i` or a bare real.
pub(crate) fn parse_complex(field: &[u8]) -> Option<Complex64> {
    let Some(body) = field.strip_suffix(b"i") else {
        return parse_real(field).map(|re| Complex64::new(re, 0.0));
    };
    // The separating sign is the last +/- that is neither leading nor part
    // of an exponent.
    let split = (1..body.len())
        .rev()
        .find(|&i| matches!(body[i], b'+' | b'-') && !matches!(body[i - 1], b'e' | b'E'));
    match split {
        Some(i) => {
            let re = parse_real(&body[..i])?;
            let magnitude = parse_real(&body[i + 1..])?;
            let im = if body[i] == b'-' { -magnitude } else { magnitude };
            Some(Complex64::new(re, im))
        }
        None => parse_real(body).map(|im| Complex64::new(0.0, im)),
    }
}

/// `YYYY-MM-DD HH:MM:SS` (UTC) or a bare number of epoch seconds.
pub(crate) fn parse_timestamp(field: &[u8]) -> Option<f64> {
    if field.len() == 19 && field[4] == b'-' {
        return parse_datetime(field).map(|s| s as f64);
    }
    if let Some(i) = parse_int(field) {
        if i != 0 || field.first() != Some(&b'-') {
            return Some(i as f64);
        }
    }
    parse_real(field).filter(|x| x.is_finite())
}

fn parse_datetime(f: &[u8]) -> Option<i64> {
    if f[7] != b'-' || f[10] != b' ' || f[13] != b':' || f[16] != b':' {
        return None;
    }
    let num = |range: std::ops::Range<usize>| -> Option<i64> {
        f[range].iter().try_fold(0i64, |acc, &b| {
            b.is_ascii_digit().then(|| acc * 10 + i64::from(b - b'0'))
        })
    };
    let (year, month, day) = (num(0..4)?, num(5..7)?, num(8..10)?);
    let (hour, minute, second) = (num(11..13)?, num(14..16)?, num(17..19)?);
    if !(1..=12).contains(&month)
        || day < 1
        || day > days_in_month(year, month)
        || hour > 23
        || minute > 59
        || second > 59
    {
        return None;
    }
    Some(civil_to_epoch(year, month, day) * 86_400 + hour * 3600 + minute * 60 + second)
}

fn is_leap(year: i64) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

fn days_in_month(year: i64, month: i64) -> i64 {
    match month {
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        2 => 28,
        _ => 31,
    }
}

/// Days since 1970-01-01 for a proleptic Gregorian date.
pub fn civil_to_epoch(year: i64, month: i64, day: i64) -> i64 {
    let y = if month <= 2 { year - 1 } else { year };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (month + 9) % 12;
    let doy = (153 * mp + 2) / 5 + day - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

/// Inverse of [`civil_to_epoch`]: `(year, month, day)`.
pub fn epoch_to_civil(days: i64) -> (i64, i64, i64) {
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = yoe + era * 400 + i64::from(month <= 2);
    (year, month, day)
}

#[inline]
fn hex_val(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'a'..=b'f' => Some(b - b'a' + 10),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

/// Appends the bytes encoded by an even-length hex string; `false` if the
/// field is not valid hex (the output is then left partially written).
pub(crate) fn decode_hex_into(field: &[u8], out: &mut Vec<u8>) -> bool {
    if !field.len().is_multiple_of(2) {
        return false;
    }
    for pair in field.chunks_exact(2) {
        match (hex_val(pair[0]), hex_val(pair[1])) {
            (Some(hi), Some(lo)) => out.push(hi << 4 | lo),
            _ => return false,
        }
    }
    true
}
