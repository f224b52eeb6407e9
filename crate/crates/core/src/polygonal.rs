//! Generalized polygonal numbers, m-gonal forms and the shift that turns a
//! representation problem for an m-gonal form into one for a diagonal
//! quadratic form with a congruence condition on the variables.

use num_bigint::BigInt;
use num_integer::Roots;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::gcd_all;
use crate::error::{Error, Result};

/// `P_m(x) = (m-2)(x^2-x)/2 + x`, defined for every integer `x`.
pub fn polygonal_number(m: u64, x: i64) -> Result<u128> {
    if m < 3 {
        return Err(Error::Domain(format!("polygonality m = {m} must be at least 3")));
    }
    let x = x as i128;
    // x(x-1) is always even and non-negative
    let half = x * (x - 1) / 2;
    let value = ((m - 2) as i128)
        .checked_mul(half)
        .and_then(|v| v.checked_add(x))
        .ok_or(Error::Overflow("polygonal_number"))?;
    assert!(value >= 0, "generalized polygonal number P_{m}({x}) is negative");
    Ok(value as u128)
}

/// Inverse of [`polygonal_number`]: some `x` with `P_m(x) = n`, preferring the
/// smallest `|x|` and, on a tie, the positive root.
pub fn is_generalized_polygonal(m: u64, n: u128) -> Result<Option<i64>> {
    if m < 3 {
        return Err(Error::Domain(format!("polygonality m = {m} must be at least 3")));
    }
    // (m-2)x^2 - (m-4)x - 2n = 0
    let a = (m - 2) as i128;
    let b = m as i128 - 4;
    let disc = (8 * a as u128)
        .checked_mul(n)
        .and_then(|v| v.checked_add((b * b) as u128))
        .ok_or(Error::Overflow("is_generalized_polygonal"))?;
    let s = disc.sqrt();
    if s * s != disc {
        return Ok(None);
    }
    let s = i128::try_from(s).map_err(|_| Error::Overflow("is_generalized_polygonal"))?;
    let mut roots: Vec<i128> =
        [b + s, b - s].into_iter().filter(|num| num % (2 * a) == 0).map(|num| num / (2 * a)).collect();
    roots.sort_by_key(|&x| (x.abs(), x < 0));
    for x in roots {
        let Ok(x) = i64::try_from(x) else { continue };
        if polygonal_number(m, x)? == n {
            return Ok(Some(x));
        }
    }
    Ok(None)
}

/// A primitive weighted sum `a_1 P_m(x_1) + ... + a_n P_m(x_n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct MGonalForm {
    m: u64,
    coeffs: Vec<u64>,
}

impl MGonalForm {
    pub fn new(m: u64, coeffs: Vec<u64>) -> Result<Self> {
        if m < 3 {
            return Err(Error::Domain(format!("polygonality m = {m} must be at least 3")));
        }
        if coeffs.is_empty() {
            return Err(Error::Domain("an m-gonal form needs at least one coefficient".into()));
        }
        if coeffs.contains(&0) {
            return Err(Error::Domain(format!("coefficients {coeffs:?} must be positive")));
        }
        let g = gcd_all(&coeffs);
        if g != 1 {
            return Err(Error::NonPrimitive { coeffs, gcd: g });
        }
        Ok(Self { m, coeffs })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn rank(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff_sum(&self) -> u128 {
        self.coeffs.iter().map(|&a| a as u128).sum()
    }

    /// The diagonal quadratic form with the same weights.
    pub fn quadratic(&self) -> DiagonalQuadraticForm {
        DiagonalQuadraticForm { coeffs: self.coeffs.clone() }
    }

    pub fn evaluate(&self, x: &[i64]) -> Result<u128> {
        if x.len() != self.rank() {
            return Err(Error::Domain(format!("vector of length {} for a form of rank {}", x.len(), self.rank())));
        }
        let mut total = 0u128;
        for (&a, &xi) in self.coeffs.iter().zip(x) {
            total = polygonal_number(self.m, xi)?
                .checked_mul(a as u128)
                .and_then(|t| total.checked_add(t))
                .ok_or(Error::Overflow("evaluate"))?;
        }
        Ok(total)
    }

    pub fn shift(&self, n: &BigInt, kind: ShiftKind) -> Result<ShiftedTarget> {
        if n.is_negative() {
            return Err(Error::Domain(format!("shift target {n} must be non-negative")));
        }
        let (scale, root) = self.shift_parameters(kind)?;
        let offset = BigInt::from(root) * BigInt::from(root) * BigInt::from(self.coeff_sum());
        let theta = BigInt::from(scale) * n + &offset;
        Ok(ShiftedTarget { kind, theta, scale, offset })
    }

    pub fn shift_u64(&self, n: u64, kind: ShiftKind) -> Result<ShiftedTarget> {
        self.shift(&BigInt::from(n), kind)
    }

    /// `(scale, c)` such that `theta = scale*N + c^2 * sum(a)`; the shifted
    /// coordinates are `y = 2(m-2)x - (m-4)` (generic) or `(m-2)/2 x - (m-4)/4` (dyadic).
    fn shift_parameters(&self, kind: ShiftKind) -> Result<(u64, i64)> {
        let m = self.m;
        match kind {
            ShiftKind::Generic => {
                let scale = (m - 2).checked_mul(8).ok_or(Error::Overflow("shift"))?;
                Ok((scale, m as i64 - 4))
            }
            ShiftKind::Dyadic => {
                if m % 4 != 0 {
                    return Err(Error::Domain(format!("dyadic shift needs m = 0 (mod 4), got m = {m}")));
                }
                Ok(((m - 2) / 2, (m as i64 - 4) / 4))
            }
        }
    }

    /// Coordinates `y_i` of the shifted equation `sum a_i y_i^2 = theta`.
    pub fn shift_coordinates(&self, x: &[i64], kind: ShiftKind) -> Result<Vec<i128>> {
        let m = self.m as i128;
        match kind {
            ShiftKind::Generic => Ok(x.iter().map(|&xi| 2 * (m - 2) * xi as i128 - (m - 4)).collect()),
            ShiftKind::Dyadic => {
                self.shift_parameters(kind)?;
                Ok(x.iter().map(|&xi| (m - 2) / 2 * xi as i128 - (m - 4) / 4).collect())
            }
        }
    }

    /// Recovers `x` from generic shifted coordinates `y_i = 2(m-2)x_i - (m-4)`.
    /// Returns `None` when some `y_i` is not `-(m-4)` modulo `2(m-2)`.
    pub fn unshift_solution(&self, y: &[i128]) -> Option<Vec<i64>> {
        if y.len() != self.rank() {
            return None;
        }
        let m = self.m as i128;
        let modulus = 2 * (m - 2);
        y.iter()
            .map(|&yi| {
                let t = yi.checked_add(m - 4)?;
                if t % modulus != 0 {
                    return None;
                }
                i64::try_from(t / modulus).ok()
            })
            .collect()
    }
}

impl std::fmt::Display for MGonalForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let list: Vec<String> = self.coeffs.iter().map(u64::to_string).collect();
        write!(f, "<{}>_{}", list.join(","), self.m)
    }
}

/// `<a_1, ..., a_n>`, the form `a_1 x_1^2 + ... + a_n x_n^2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct DiagonalQuadraticForm {
    coeffs: Vec<u64>,
}

impl DiagonalQuadraticForm {
    /// Non-primitive forms are accepted here.
    pub fn new(coeffs: Vec<u64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.contains(&0) {
            return Err(Error::Domain(format!("coefficients {coeffs:?} must be positive and non-empty")));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn rank(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_primitive(&self) -> bool {
        gcd_all(&self.coeffs) == 1
    }

    pub fn value(&self, x: &[i128]) -> BigInt {
        self.coeffs.iter().zip(x).map(|(&a, &xi)| BigInt::from(a) * BigInt::from(xi) * BigInt::from(xi)).sum()
    }
}

impl std::fmt::Display for DiagonalQuadraticForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let list: Vec<String> = self.coeffs.iter().map(u64::to_string).collect();
        write!(f, "<{}>", list.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftKind {
    /// `theta = 8(m-2)N + (m-4)^2 sum(a)`
    Generic,
    /// `theta = (m-2)/2 N + ((m-4)/4)^2 sum(a)`, only for `m = 0 (mod 4)`.
    Dyadic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftedTarget {
    pub kind: ShiftKind,
    #[serde(with = "decimal")]
    pub theta: BigInt,
    pub scale: u64,
    #[serde(with = "decimal")]
    pub offset: BigInt,
}

/// Serde adapter writing big integers as decimal strings.
pub mod decimal {
    use num_bigint::BigInt;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(n)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Int(i64),
        }
        match Repr::deserialize(d)? {
            Repr::Text(t) => t.trim().parse().map_err(D::Error::custom),
            Repr::Int(i) => Ok(BigInt::from(i)),
        }
    }
}

impl ShiftedTarget {
    /// Inverts `theta = scale*N + offset`, if `theta` lies in the image.
    pub fn unshift(&self, theta: &BigInt) -> Option<BigInt> {
        let diff = theta - &self.offset;
        if diff.is_negative() {
            return None;
        }
        let scale = BigInt::from(self.scale);
        (&diff % &scale).is_zero().then(|| diff / scale)
    }

    pub fn theta_u128(&self) -> Option<u128> {
        self.theta.to_u128()
    }
}
