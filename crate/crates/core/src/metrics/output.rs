use std::fmt::Write as _;

use super::sweep::{CurvePoint, SweepRow};

/// Significant digits used by rounded CSV output.
pub const CSV_DIGITS: usize = 6;

/// Formats `x` with [`CSV_DIGITS`] significant digits, or in shortest
/// round-trip form when `full` is set.
pub fn format_number(x: f64, full: bool) -> String {
    if full || !x.is_finite() || x == 0.0 {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", CSV_DIGITS - 1, x);
    let exp: i32 = sci.split_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    if (-5..CSV_DIGITS as i32).contains(&exp) {
        let decimals = (CSV_DIGITS as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

pub const SWEEP_HEADER: &str = "n,q,s,W,W_over_sqrt_n,completion_rate,source";

pub fn sweep_csv(rows: &[SweepRow], full: bool) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n,
            r.q,
            r.s,
            format_number(r.w, full),
            format_number(r.w_over_sqrt_n, full),
            format_number(r.completion_rate, full),
            r.source.name()
        );
    }
    out
}

/// Whitespace-separated columns `n rate sqrt_reference worst_case`, with a
/// commented header line.
pub fn curve_dat(points: &[CurvePoint], full: bool) -> String {
    let mut out = String::from("# n rate c_over_sqrt_n one_over_n\n");
    for p in points {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            p.n,
            format_number(p.rate, full),
            format_number(p.sqrt_reference, full),
            format_number(p.worst_case, full)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_number(20.0 / 7.0, false), "2.85714");
        assert_eq!(format_number(14.797519552940948, false), "14.7975");
        assert_eq!(format_number(123456789.0, false), "1.23457e8");
        assert_eq!(format_number(123456.4, false), "123456");
        assert_eq!(format_number(0.000123456789, false), "0.000123457");
        assert_eq!(format_number(1e-9, false), "1.00000e-9");
        assert_eq!(format_number(0.0, false), "0");
    }

    #[test]
    fn full_precision_round_trips() {
        let x = 369.0 / 106.0;
        assert_eq!(format_number(x, true).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn rounding_carries_into_next_digit() {
        assert_eq!(format_number(9.9999996, false), "10.0000");
    }
}
