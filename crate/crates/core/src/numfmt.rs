//! Number rendering shared by report writers.

use serde::Serializer;

/// Round to 6 decimal digits for JSON reports.
pub(crate) fn round6(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub(crate) fn ser_round6<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round6(*x))
}

pub(crate) fn ser_round6_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&round6(*v)),
        None => s.serialize_none(),
    }
}

pub(crate) fn ser_round6_points<S: Serializer>(pts: &[[f64; 2]], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(pts.len()))?;
    for p in pts {
        seq.serialize_element(&[round6(p[0]), round6(p[1])])?;
    }
    seq.end()
}

/// Plain decimal with 17 significant digits (round-trips any f64).
pub(crate) fn sig17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.16e}", x);
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    let decimals = (16 - exp).max(0) as usize;
    format!("{:.*}", decimals, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig17_renders_seventeen_digits() {
        assert_eq!(sig17(0.1), "0.10000000000000001");
        assert_eq!(sig17(0.5), "0.50000000000000000");
        assert_eq!(sig17(1.0), "1.0000000000000000");
        assert_eq!(sig17(1.0 / 6.0), "0.16666666666666666");
        let tiny = 1.0 / 3.0e5;
        assert_eq!(sig17(tiny).parse::<f64>().unwrap(), tiny);
    }

    #[test]
    fn round6_basic() {
        assert_eq!(round6(0.9540000001), 0.954);
        assert_eq!(round6(1.0 / 3.0), 0.333333);
    }
}
