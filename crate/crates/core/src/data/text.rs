/// Rounds to 9 significant decimal digits, the precision of every text format
/// in this crate. Values that have been quantized survive a write/read cycle
/// bit-exactly.
pub fn quantize(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("scientific notation always parses")
}

/// Decimal text for `x` with at most 9 significant digits.
pub fn format_value(x: f64) -> String {
    format!("{}", quantize(x))
}

pub(crate) fn parse_key_values(line: &str) -> impl Iterator<Item = (&str, &str)> {
    line.split_whitespace().filter_map(|tok| tok.split_once('='))
}

pub(crate) fn lookup<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    parse_key_values(line).find(|(k, _)| *k == key).map(|(_, v)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn short_values_print_plainly() {
        assert_eq!(format_value(0.5), "0.5");
        assert_eq!(format_value(-3.0), "-3");
        assert_eq!(format_value(0.0), "0");
        assert_eq!(format_value(1.0 / 3.0), "0.333333333");
    }

    proptest! {
        #[test]
        fn quantized_values_round_trip(x in -1e6f64..1e6) {
            let q = quantize(x);
            let back: f64 = format_value(q).parse().unwrap();
            prop_assert_eq!(back.to_bits(), q.to_bits());
            prop_assert!((q - x).abs() <= x.abs() * 1e-8 + 1e-300);
        }
    }
}
