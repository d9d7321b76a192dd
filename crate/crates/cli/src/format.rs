//! Byte-stable text output: `%.9g`-style numbers, comma-separated rows, LF endings.

use std::fmt::Write as _;

/// Nine significant digits, shortest of fixed or exponent notation, trailing
/// zeros removed.
pub fn g9(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        return format!(
            "{}e{}{:02}",
            trim(mantissa),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        );
    }
    let decimals = (8 - exp).max(0) as usize;
    trim(&format!("{v:.decimals$}")).to_string()
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV document with a provenance comment as its first line.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header_comment: &str, columns: &[&str]) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "# {header_comment}");
        text.push_str(&columns.join(","));
        text.push('\n');
        Csv { text }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        for (k, c) in cells.iter().enumerate() {
            if k > 0 {
                self.text.push(',');
            }
            match c {
                Cell::Int(i) => {
                    let _ = write!(self.text, "{i}");
                }
                Cell::Num(v) => self.text.push_str(&g9(*v)),
                Cell::Text(s) => self.text.push_str(s),
            }
        }
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

pub enum Cell<'a> {
    Int(i64),
    Num(f64),
    Text(&'a str),
}

impl From<f64> for Cell<'_> {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell<'_> {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl<'a> From<&'a str> for Cell<'a> {
    fn from(v: &'a str) -> Self {
        Cell::Text(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(g9(1.0), "1");
        assert_eq!(g9(-0.5), "-0.5");
        assert_eq!(g9(1.0 / 3.0), "0.333333333");
        assert_eq!(g9(2.0 / 3.0 * 1e-7), "6.66666667e-08");
        assert_eq!(g9(123456789.0), "123456789");
        assert_eq!(g9(1234567891.0), "1.23456789e+09");
        assert_eq!(g9(4.0 / 9.0), "0.444444444");
        assert_eq!(g9(0.0001), "0.0001");
        assert_eq!(g9(99999999.95), "100000000");
    }

    #[test]
    fn rows_use_commas_and_lf() {
        let mut csv = Csv::new("seed=1", &["a", "b", "c"]);
        csv.row(&[Cell::from(3usize), Cell::from(0.25), Cell::from("x")]);
        assert_eq!(csv.finish(), "# seed=1\na,b,c\n3,0.25,x\n");
    }
}
