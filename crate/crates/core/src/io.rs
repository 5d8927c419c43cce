//! JSON interchange.
//!
//! Matrices travel as `{"rows": r, "cols": c, "re": [[..]], "im": [[..]]}`
//! where `im` may be omitted (all-zero imaginary part). Vectors use
//! `{"re": [..], "im": [..]}`. Reports are written through
//! [`to_json_string`], which prints every float with 17 significant digits
//! (C `%.17g`), so files round-trip bit-exactly and are byte-stable.

use std::io;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, C64};

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im: Option<Vec<Vec<f64>>>,
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let re = (0..self.rows()).map(|i| self.row(i).iter().map(|z| z.re).collect()).collect();
        let has_im = self.data().iter().any(|z| z.im != 0.0);
        let im = has_im.then(|| (0..self.rows()).map(|i| self.row(i).iter().map(|z| z.im).collect()).collect());
        MatrixRepr { rows: self.rows(), cols: self.cols(), re, im }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(d)?;
        matrix_from_repr(repr).map_err(D::Error::custom)
    }
}

fn matrix_from_repr(repr: MatrixRepr) -> Result<Matrix> {
    let MatrixRepr { rows, cols, re, im } = repr;
    if re.len() != rows {
        return Err(Error::input("re", format!("expected {rows} rows, found {}", re.len())));
    }
    if let Some(bad) = re.iter().position(|r| r.len() != cols) {
        return Err(Error::input("re", format!("row {bad} has {} entries, expected {cols}", re[bad].len())));
    }
    if let Some(im) = &im {
        if im.len() != rows {
            return Err(Error::input("im", format!("expected {rows} rows, found {}", im.len())));
        }
        if let Some(bad) = im.iter().position(|r| r.len() != cols) {
            return Err(Error::input("im", format!("row {bad} has {} entries, expected {cols}", im[bad].len())));
        }
    }
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let b = im.as_ref().map_or(0.0, |im| im[i][j]);
            data.push(C64::new(re[i][j], b));
        }
    }
    Matrix::new(rows, cols, data)
}

/// Parses a matrix from its JSON text, naming the offending field on error.
pub fn matrix_from_json(text: &str) -> Result<Matrix> {
    let repr: MatrixRepr = serde_json::from_str(text)?;
    matrix_from_repr(repr)
}

#[derive(Serialize, Deserialize)]
struct VecRepr {
    re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im: Option<Vec<f64>>,
}

/// `serde(with = ...)` adapter for complex vectors.
pub mod complex_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
        let re = v.iter().map(|z| z.re).collect();
        let im = v.iter().any(|z| z.im != 0.0).then(|| v.iter().map(|z| z.im).collect());
        VecRepr { re, im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<C64>, D::Error> {
        let VecRepr { re, im } = VecRepr::deserialize(d)?;
        match im {
            None => Ok(re.into_iter().map(|x| C64::new(x, 0.0)).collect()),
            Some(im) if im.len() == re.len() => {
                Ok(re.into_iter().zip(im).map(|(a, b)| C64::new(a, b)).collect())
            }
            Some(_) => Err(D::Error::custom("re and im lengths differ")),
        }
    }
}

/// `serde(with = ...)` adapter for a single complex scalar as `[re, im]`.
pub mod complex_scalar {
    use super::*;

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<C64, D::Error> {
        let [a, b] = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(a, b))
    }
}

/// Formats `x` like C's `%.17g`.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        // JSON has no spelling for these; callers keep them out of reports.
        return "null".into();
    }
    let sci = format!("{:.16e}", x);
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let mant = trim_zeros(mant.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Pretty JSON formatter printing floats via [`format_g17`].
struct G17Formatter<'a> {
    inner: PrettyFormatter<'a>,
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.inner.$name(w $(, $arg)*)
            }
        )*
    };
}

impl Formatter for G17Formatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_g17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        w.write_all(format_g17(value as f64).as_bytes())
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        end_object_key();
        begin_object_value();
        end_object_value();
    }
}

/// Serializes `value` as pretty JSON with 17-significant-digit floats.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let fmt = G17Formatter { inner: PrettyFormatter::with_indent(b"  ") };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g17_matches_printf_style() {
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(2.5), "2.5");
        assert_eq!(format_g17(-3.0), "-3");
        assert_eq!(format_g17(1e-7), "9.9999999999999995e-08");
        assert_eq!(format_g17(1e20), "1e+20");
        assert_eq!(format_g17(123456.0), "123456");
    }

    #[test]
    fn im_is_optional() {
        let m = matrix_from_json(r#"{"rows":2,"cols":2,"re":[[1,0],[0,1]]}"#).unwrap();
        assert_eq!(m, Matrix::identity(2));
        let err = matrix_from_json(r#"{"rows":2,"cols":2,"re":[[1,0]]}"#).unwrap_err();
        assert!(err.to_string().contains("re"), "{err}");
        let err = matrix_from_json(r#"{"rows":1,"cols":2,"re":[[1,0]],"im":[[1]]}"#).unwrap_err();
        assert!(err.to_string().contains("im"), "{err}");
    }

    proptest! {
        #[test]
        fn g17_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let s = format_g17(x);
            prop_assert_eq!(s.parse::<f64>().unwrap(), x);
        }

        #[test]
        fn matrix_json_round_trips(
            r in 1usize..4, c in 1usize..4,
            seed in any::<u64>(),
        ) {
            let m = crate::random::gaussian_matrix(&mut crate::random::rng(seed), r, c);
            let text = to_json_string(&m).unwrap();
            let back = matrix_from_json(&text).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
