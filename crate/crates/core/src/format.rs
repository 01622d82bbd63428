//! Number formatting shared by the JSON and CSV outputs.

use serde::Serializer;

/// Serialises a dB value as a JSON number, or as the strings `"inf"` /
/// `"-inf"` / `"nan"` for non-finite sentinels.
pub fn serialize_db<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&nonfinite(*v))
    }
}

pub fn serialize_opt_db<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => serialize_db(x, s),
        None => s.serialize_none(),
    }
}

fn nonfinite(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Six significant digits in the style of C's `%g`.
pub fn sig6(v: f64) -> String {
    if !v.is_finite() {
        return nonfinite(v);
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    // Rounding can bump the exponent (e.g. 999999.7 -> 1e6).
    let sci = format!("{:.5e}", v);
    let (mantissa, e) = sci.split_once('e').expect("scientific format");
    let e: i32 = e.parse().expect("exponent");
    let exp = if e != exp { e } else { exp };
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, v))
    } else {
        let m = trim_zeros(mantissa.to_string());
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_matches_printf_g() {
        assert_eq!(sig6(3.0102999566), "3.0103");
        assert_eq!(sig6(-60.0), "-60");
        assert_eq!(sig6(0.000123456789), "0.000123457");
        assert_eq!(sig6(1234567.0), "1.23457e+06");
        assert_eq!(sig6(0.0000012345), "1.2345e-06");
        assert_eq!(sig6(999999.7), "1e+06");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(f64::INFINITY), "inf");
        assert_eq!(sig6(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn db_sentinels_serialise_as_strings() {
        #[derive(serde::Serialize)]
        struct R {
            #[serde(serialize_with = "serialize_db")]
            a: f64,
            #[serde(serialize_with = "serialize_db")]
            b: f64,
        }
        let s = serde_json::to_string(&R {
            a: f64::INFINITY,
            b: 0.1,
        })
        .unwrap();
        assert_eq!(s, r#"{"a":"inf","b":0.1}"#);
    }
}
