//! Number formatting and row output.

use std::io::{self, Write};

/// Shortest `%.17g`-style rendering: 17 significant digits, trailing zeros
/// dropped, scientific notation outside `1e-5 ≤ |x| < 1e17`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub struct Table<W: Write> {
    out: W,
}

impl<W: Write> Table<W> {
    pub fn new(mut out: W, header: &[&str]) -> io::Result<Self> {
        writeln!(out, "{}", header.join(","))?;
        Ok(Self { out })
    }

    pub fn row(&mut self, cells: &[String]) -> io::Result<()> {
        writeln!(self.out, "{}", cells.join(","))
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::num;

    #[test]
    fn seventeen_digits() {
        assert_eq!(num(0.481_211_825_059_603_47), "0.48121182505960347");
        assert_eq!(num(1.0), "1");
        assert_eq!(num(-2.5), "-2.5");
        assert_eq!(num(12.0), "12");
        assert_eq!(num(1e-7), "9.9999999999999995e-8");
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02e23, -0.000_123_456_789] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
