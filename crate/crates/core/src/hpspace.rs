//! Mixed real/integer hyperparameter search spaces.
//!
//! Log-scaled dimensions keep their bounds in exponent units (a learning rate
//! in `[1e-6, 1]` is written `low = -6, high = 0, log_base = 10`) and expose
//! native values everywhere else. The unit-cube view used by the Gaussian
//! process is an affine map of the encoded coordinate.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionKind {
    Real,
    Integer,
}

/// One search dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimension {
    pub name: String,
    pub kind: DimensionKind,
    /// Lower bound, in exponent units when `log_base` is set.
    pub low: f64,
    pub high: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_base: Option<f64>,
}

impl Dimension {
    pub fn real(name: &str, low: f64, high: f64) -> Self {
        Dimension {
            name: name.to_string(),
            kind: DimensionKind::Real,
            low,
            high,
            log_base: None,
        }
    }

    pub fn integer(name: &str, low: f64, high: f64) -> Self {
        Dimension {
            kind: DimensionKind::Integer,
            ..Dimension::real(name, low, high)
        }
    }

    pub fn log(mut self, base: f64) -> Self {
        self.log_base = Some(base);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.low.is_finite() && self.high.is_finite() && self.low < self.high) {
            return Err(Error::Config(alloc::format!(
                "dimension `{}` needs finite low < high, got [{}, {}]",
                self.name,
                self.low,
                self.high
            )));
        }
        if let Some(base) = self.log_base {
            if !(base.is_finite() && base > 1.0) {
                return Err(Error::Config(alloc::format!(
                    "dimension `{}` has log_base {} (must be > 1)",
                    self.name,
                    base
                )));
            }
        }
        if self.kind == DimensionKind::Integer
            && (self.low.fract() != 0.0 || self.high.fract() != 0.0)
        {
            return Err(Error::Config(alloc::format!(
                "integer dimension `{}` needs integer bounds",
                self.name
            )));
        }
        Ok(())
    }

    /// Maps a native value to the encoded axis (the exponent for log dims).
    pub fn encode(&self, native: f64) -> f64 {
        match self.log_base {
            None => native,
            Some(b) if b == 10.0 => native.log10(),
            Some(b) if b == 2.0 => native.log2(),
            Some(b) => native.ln() / b.ln(),
        }
    }

    /// Maps an encoded coordinate back to native units.
    pub fn decode(&self, encoded: f64) -> f64 {
        match self.log_base {
            None => encoded,
            Some(b) => b.powf(encoded),
        }
    }

    /// Snaps an encoded coordinate to the lattice (integer dims) and clamps it.
    pub fn snap(&self, encoded: f64) -> f64 {
        let e = match self.kind {
            DimensionKind::Real => encoded,
            // ties go up
            DimensionKind::Integer => (encoded + 0.5).floor(),
        };
        e.max(self.low).min(self.high)
    }

    /// Encoded coordinate of a native value, checked against the range.
    fn checked_encode(&self, native: f64) -> Result<f64> {
        let range_err = || Error::Range {
            name: self.name.clone(),
            value: native,
            low: self.decode(self.low),
            high: self.decode(self.high),
        };
        if !native.is_finite() || (self.log_base.is_some() && native <= 0.0) {
            return Err(range_err());
        }
        let mut e = self.encode(native);
        let tol = 1e-9 * (self.high - self.low);
        if e < self.low - tol || e > self.high + tol {
            return Err(range_err());
        }
        if self.kind == DimensionKind::Integer {
            let r = e.round();
            if (e - r).abs() > 1e-9 {
                return Err(range_err());
            }
            e = r;
        }
        Ok(e.max(self.low).min(self.high))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e = match self.kind {
            DimensionKind::Real => rng.random_range(self.low..=self.high),
            DimensionKind::Integer => {
                rng.random_range(self.low as i64..=self.high as i64) as f64
            }
        };
        self.decode(e)
    }
}

/// A point in a [`HyperparameterSpace`], in native units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HpVector(pub Vec<f64>);

impl HpVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for HpVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// Ordered list of dimensions; the order is the vector order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Dimension>", into = "Vec<Dimension>")]
pub struct HyperparameterSpace {
    dims: Vec<Dimension>,
}

impl TryFrom<Vec<Dimension>> for HyperparameterSpace {
    type Error = Error;

    fn try_from(dims: Vec<Dimension>) -> Result<Self> {
        HyperparameterSpace::new(dims)
    }
}

impl From<HyperparameterSpace> for Vec<Dimension> {
    fn from(space: HyperparameterSpace) -> Self {
        space.dims
    }
}

impl HyperparameterSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Config("search space has no dimensions".into()));
        }
        for (i, d) in dims.iter().enumerate() {
            d.validate()?;
            if dims[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::Config(alloc::format!(
                    "duplicate dimension `{}`",
                    d.name
                )));
            }
        }
        Ok(HyperparameterSpace { dims })
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> HpVector {
        HpVector(self.dims.iter().map(|d| d.sample(rng)).collect())
    }

    /// Checks length, ranges and integer lattice membership.
    pub fn validate(&self, v: &HpVector) -> Result<()> {
        self.normalize(v).map(|_| ())
    }

    pub fn normalize(&self, v: &HpVector) -> Result<Vec<f64>> {
        if v.len() != self.dims.len() {
            return Err(Error::Argument(alloc::format!(
                "vector has {} coordinates, space has {} dimensions",
                v.len(),
                self.dims.len()
            )));
        }
        self.dims
            .iter()
            .zip(v.values())
            .map(|(d, &x)| {
                let e = d.checked_encode(x)?;
                Ok((e - d.low) / (d.high - d.low))
            })
            .collect()
    }

    /// Inverse of [`normalize`](Self::normalize); inputs are clamped to the
    /// unit interval and integer coordinates rounded to the nearest lattice
    /// point (ties up) in encoded units.
    pub fn denormalize(&self, u: &[f64]) -> HpVector {
        debug_assert_eq!(u.len(), self.dims.len());
        HpVector(
            self.dims
                .iter()
                .zip(u)
                .map(|(d, &ui)| {
                    let e = d.low + ui.max(0.0).min(1.0) * (d.high - d.low);
                    d.decode(d.snap(e))
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use crate::rng::{stream, Purpose};
    use alloc::vec;
    use proptest::prelude::*;

    fn table_space() -> HyperparameterSpace {
        HyperparameterSpace::new(vec![
            Dimension::real("learning_rate", -6.0, 0.0).log(10.0),
            Dimension::real("momentum", 0.5, 0.999),
            Dimension::integer("batch_size", 8.0, 10.0).log(2.0),
        ])
        .unwrap()
    }

    #[test]
    fn sampling_respects_ranges_and_lattice() {
        let space = table_space();
        let mut rng = stream(1, Purpose::Init, 0, 0);
        for _ in 0..2000 {
            let v = space.sample_uniform(&mut rng);
            assert!((1e-6..=1.0).contains(&v.0[0]));
            assert!((0.5..=0.999).contains(&v.0[1]));
            assert!([256.0, 512.0, 1024.0].contains(&v.0[2]), "{}", v.0[2]);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let space = HyperparameterSpace::new(vec![Dimension::real("x", 0.0, 1.0)]).unwrap();
        let a = space.sample_uniform(&mut stream(9, Purpose::Init, 0, 0));
        let b = space.sample_uniform(&mut stream(9, Purpose::Init, 0, 0));
        assert_eq!(a, b);
    }

    #[test]
    fn log_sampling_is_uniform_in_exponent() {
        let space = table_space();
        let mut rng = stream(2, Purpose::Init, 0, 0);
        let n = 10_000;
        let mean = (0..n)
            .map(|_| space.sample_uniform(&mut rng).0[0].log10())
            .sum::<f64>()
            / n as f64;
        assert!((mean + 3.0).abs() < 0.1, "mean exponent {mean}");
    }

    #[test]
    fn normalize_examples() {
        let space = table_space();
        let u = space
            .normalize(&HpVector(vec![1e-3, 0.5, 512.0]))
            .unwrap();
        assert!((u[0] - 0.5).abs() < 1e-12);
        assert_eq!(u[1], 0.0);
        assert_eq!(u[2], 0.5);
    }

    #[test]
    fn denormalize_examples() {
        let space = table_space();
        let v = space.denormalize(&[0.5, 0.0, 0.49]);
        assert!((v.0[0] - 1e-3).abs() < 1e-15);
        // exponent 8 + 0.49 * 2 = 8.98 rounds to 9
        assert_eq!(v.0[2], 512.0);
        // exactly halfway between lattice points rounds up
        let v = space.denormalize(&[0.0, 0.0, 0.25]);
        assert_eq!(v.0[2], 512.0);
    }

    #[test]
    fn out_of_range_is_rejected() {
        let space = table_space();
        assert!(matches!(
            space.normalize(&HpVector(vec![2.0, 0.5, 512.0])),
            Err(Error::Range { .. })
        ));
        assert!(space.normalize(&HpVector(vec![1e-3, 0.5, 300.0])).is_err());
        assert!(space.normalize(&HpVector(vec![1e-3, 0.5])).is_err());
    }

    #[test]
    fn invalid_spaces_are_rejected() {
        assert!(HyperparameterSpace::new(vec![Dimension::real("a", 1.0, 1.0)]).is_err());
        assert!(HyperparameterSpace::new(vec![Dimension::real("a", 0.0, 1.0).log(1.0)]).is_err());
        assert!(HyperparameterSpace::new(vec![Dimension::integer("a", 0.5, 3.0)]).is_err());
        assert!(HyperparameterSpace::new(vec![
            Dimension::real("a", 0.0, 1.0),
            Dimension::real("a", 0.0, 2.0)
        ])
        .is_err());
    }

    proptest! {
        #[test]
        fn normalize_denormalize_round_trip(seed in any::<u64>()) {
            let space = table_space();
            let v = space.sample_uniform(&mut stream(seed, Purpose::Init, 0, 0));
            let back = space.denormalize(&space.normalize(&v).unwrap());
            prop_assert_eq!(back.0[2], v.0[2]);
            for i in 0..2 {
                prop_assert!((back.0[i] - v.0[i]).abs() <= 1e-12 * v.0[i].abs());
            }
        }
    }
}
