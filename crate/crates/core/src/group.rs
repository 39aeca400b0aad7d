//! Prime-order elliptic-curve groups.
//!
//! The protocol is written against the [`Curve`] trait so the concrete group
//! is a configuration choice. Two standard 256-bit curves are provided:
//! NIST P-256 (the default) and secp256k1.
//!
//! [`Scalar`] and [`GroupPoint`] wrap the backend types so that scalar
//! multiplications and point additions pass through the operation counter.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use ff::{Field, PrimeField};
use group::{Group, GroupEncoding};
use num_bigint::BigUint;
use rand_core::{CryptoRng, RngCore};

use crate::counter;
use crate::error::{Error, Result};

pub use k256::Secp256k1;
pub use p256::NistP256;

/// Named curve identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveId {
    P256,
    Secp256k1,
}

impl CurveId {
    pub fn name(self) -> &'static str {
        match self {
            CurveId::P256 => "P-256",
            CurveId::Secp256k1 => "secp256k1",
        }
    }
}

impl fmt::Display for CurveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CurveId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "p256" | "p-256" | "secp256r1" | "prime256v1" => Ok(CurveId::P256),
            "k256" | "secp256k1" => Ok(CurveId::Secp256k1),
            other => Err(format!("unknown curve `{other}`")),
        }
    }
}

/// A prime-order elliptic-curve group usable by the protocol.
pub trait Curve: fmt::Debug + Copy + Default + Eq + Send + Sync + 'static {
    type Scalar: PrimeField;
    type Point: Group<Scalar = Self::Scalar> + GroupEncoding;

    const ID: CurveId;

    /// The group order q.
    fn order() -> &'static BigUint;

    /// Fixed scalar encoding width in bytes.
    fn scalar_len() -> usize {
        <Self::Scalar as PrimeField>::Repr::default().as_ref().len()
    }

    /// Fixed compressed point encoding width in bytes, parity prefix included.
    fn point_len() -> usize {
        <Self::Point as GroupEncoding>::Repr::default().as_ref().len()
    }
}

fn parse_modulus(hex: &str) -> BigUint {
    let digits = hex.trim_start_matches("0x");
    BigUint::parse_bytes(digits.as_bytes(), 16).expect("backend modulus is valid hex")
}

macro_rules! impl_curve {
    ($curve:ty, $backend:ident, $id:expr) => {
        impl Curve for $curve {
            type Scalar = $backend::Scalar;
            type Point = $backend::ProjectivePoint;

            const ID: CurveId = $id;

            fn order() -> &'static BigUint {
                static ORDER: OnceLock<BigUint> = OnceLock::new();
                ORDER.get_or_init(|| parse_modulus(<$backend::Scalar as PrimeField>::MODULUS))
            }
        }
    };
}

impl_curve!(NistP256, p256, CurveId::P256);
impl_curve!(Secp256k1, k256, CurveId::Secp256k1);

/// An element of Z_q.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Scalar<C: Curve = NistP256>(pub(crate) C::Scalar);

impl<C: Curve> Scalar<C> {
    pub fn zero() -> Self {
        Scalar(C::Scalar::ZERO)
    }

    pub fn one() -> Self {
        Scalar(C::Scalar::ONE)
    }

    pub fn from_u64(v: u64) -> Self {
        Scalar(C::Scalar::from(v))
    }

    /// Uniform element of Z_q^*.
    pub fn random_nonzero(rng: &mut (impl RngCore + CryptoRng)) -> Self {
        loop {
            let s = C::Scalar::random(&mut *rng);
            if !bool::from(s.is_zero()) {
                return Scalar(s);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero().into()
    }

    pub fn invert(&self) -> Option<Self> {
        Option::from(self.0.invert()).map(Scalar)
    }

    /// Fixed-width big-endian bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.to_repr().as_ref().to_vec()
    }

    /// Parses a canonical (fully reduced) fixed-width big-endian scalar.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut repr = <C::Scalar as PrimeField>::Repr::default();
        if bytes.len() != repr.as_ref().len() {
            return Err(Error::Decode("scalar width"));
        }
        repr.as_mut().copy_from_slice(bytes);
        Option::from(C::Scalar::from_repr(repr))
            .map(Scalar)
            .ok_or(Error::Decode("scalar not reduced mod q"))
    }

    /// Converts an integer already known to be below q.
    pub(crate) fn from_biguint(v: &BigUint) -> Self {
        debug_assert!(v < C::order());
        let width = C::scalar_len();
        let digits = v.to_bytes_be();
        let mut buf = vec![0u8; width];
        buf[width - digits.len()..].copy_from_slice(&digits);
        Self::from_bytes(&buf).expect("value below q")
    }

    pub fn to_biguint(&self) -> BigUint {
        BigUint::from_bytes_be(&self.to_bytes())
    }
}

impl<C: Curve> std::hash::Hash for Scalar<C> {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.to_bytes().hash(state)
    }
}

impl<C: Curve> Default for Scalar<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Curve> fmt::Debug for Scalar<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", hex::encode(self.to_bytes()))
    }
}

impl<C: Curve> Add for Scalar<C> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Scalar(self.0 + rhs.0)
    }
}

impl<C: Curve> Sub for Scalar<C> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Scalar(self.0 - rhs.0)
    }
}

impl<C: Curve> Mul for Scalar<C> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Scalar(self.0 * rhs.0)
    }
}

impl<C: Curve> Neg for Scalar<C> {
    type Output = Self;
    fn neg(self) -> Self {
        Scalar(-self.0)
    }
}

impl<C: Curve> Sum for Scalar<C> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| a + b)
    }
}

/// A point of the prime-order group, or the identity.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct GroupPoint<C: Curve = NistP256>(pub(crate) C::Point);

impl<C: Curve> GroupPoint<C> {
    pub fn generator() -> Self {
        GroupPoint(C::Point::generator())
    }

    pub fn identity() -> Self {
        GroupPoint(C::Point::identity())
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_identity().into()
    }

    /// `k·self`. Counted as one scalar multiplication.
    pub fn mul(&self, k: &Scalar<C>) -> Self {
        counter::record(|c| c.scalar_mults += 1);
        GroupPoint(self.0 * k.0)
    }

    /// `k·P` for the fixed generator P. Counted as one scalar multiplication.
    pub fn mul_base(k: &Scalar<C>) -> Self {
        Self::generator().mul(k)
    }

    /// Compressed encoding with a one-byte parity prefix. The identity
    /// encodes as all zero bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.to_bytes().as_ref().to_vec()
    }

    /// Decodes a compressed point, rejecting anything not on the curve.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut repr = <C::Point as GroupEncoding>::Repr::default();
        if bytes.len() != repr.as_ref().len() {
            return Err(Error::Decode("point width"));
        }
        repr.as_mut().copy_from_slice(bytes);
        let point: C::Point =
            Option::from(C::Point::from_bytes(&repr)).ok_or(Error::Decode("point not on curve"))?;
        // the backend also admits SEC1 compact form; only the canonical
        // compressed bytes are accepted
        if point.to_bytes().as_ref() != bytes {
            return Err(Error::Decode("non-canonical point encoding"));
        }
        Ok(GroupPoint(point))
    }
}

impl<C: Curve> std::hash::Hash for GroupPoint<C> {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.to_bytes().hash(state)
    }
}

impl<C: Curve> Default for GroupPoint<C> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<C: Curve> fmt::Debug for GroupPoint<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupPoint({})", hex::encode(self.to_bytes()))
    }
}

impl<C: Curve> Add for GroupPoint<C> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        counter::record(|c| c.point_adds += 1);
        GroupPoint(self.0 + rhs.0)
    }
}

impl<C: Curve> Sub for GroupPoint<C> {
    type Output = Self;
    // a subtraction costs one addition
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn sub(self, rhs: Self) -> Self {
        counter::record(|c| c.point_adds += 1);
        GroupPoint(self.0 - rhs.0)
    }
}

impl<C: Curve> Neg for GroupPoint<C> {
    type Output = Self;
    fn neg(self) -> Self {
        GroupPoint(-self.0)
    }
}

impl<C: Curve> Sum for GroupPoint<C> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::identity(), |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counter::measure;
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;

    fn add_chain<C: Curve>(k: u64, a: GroupPoint<C>) -> GroupPoint<C> {
        (0..k).fold(GroupPoint::identity(), |acc, _| acc + a)
    }

    fn scalar_mult_matches_add_chain<C: Curve>() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let bases = [GroupPoint::<C>::generator(), GroupPoint::mul_base(&Scalar::random_nonzero(&mut rng))];
        for base in bases {
            for k in 0..=16u64 {
                assert_eq!(base.mul(&Scalar::from_u64(k)), add_chain(k, base), "k = {k}");
            }
        }
    }

    #[test]
    fn scalar_mult_small_cases() {
        let p = GroupPoint::<NistP256>::generator();
        assert!(p.mul(&Scalar::zero()).is_identity());
        assert_eq!(p.mul(&Scalar::one()), p);
        assert_eq!(p.mul(&Scalar::from_u64(2)), p + p);
    }

    #[test]
    fn scalar_mult_oracle_p256() {
        scalar_mult_matches_add_chain::<NistP256>();
    }

    #[test]
    fn scalar_mult_oracle_secp256k1() {
        scalar_mult_matches_add_chain::<Secp256k1>();
    }

    #[test]
    fn mult_is_counted() {
        let (_, c) = measure(|| GroupPoint::<NistP256>::mul_base(&Scalar::from_u64(5)));
        assert_eq!(c.scalar_mults, 1);
        assert_eq!(c.point_adds, 0);
    }

    #[test]
    fn generator_is_not_identity() {
        assert!(!GroupPoint::<NistP256>::generator().is_identity());
        assert!(!GroupPoint::<Secp256k1>::generator().is_identity());
    }

    #[test]
    fn widths() {
        assert_eq!(NistP256::scalar_len(), 32);
        assert_eq!(NistP256::point_len(), 33);
        assert_eq!(Secp256k1::point_len(), 33);
        assert_eq!(NistP256::order().bits(), 256);
    }

    #[test]
    fn identity_has_distinguished_encoding() {
        let id = GroupPoint::<NistP256>::identity().to_bytes();
        assert!(id.iter().all(|&b| b == 0));
        assert!(GroupPoint::<NistP256>::from_bytes(&id).unwrap().is_identity());
        let g = GroupPoint::<NistP256>::generator().to_bytes();
        assert!(g[0] == 0x02 || g[0] == 0x03);
    }

    #[test]
    fn off_curve_point_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut rejected = 0;
        for _ in 0..64 {
            let mut bytes = vec![0x02u8; 33];
            rng.fill_bytes(&mut bytes[1..]);
            if GroupPoint::<NistP256>::from_bytes(&bytes).is_err() {
                rejected += 1;
            }
        }
        assert!(rejected > 0);
        assert!(GroupPoint::<NistP256>::from_bytes(&[0x05; 33]).is_err());
        assert!(GroupPoint::<NistP256>::from_bytes(&[0x02; 32]).is_err());
    }

    #[test]
    fn non_canonical_scalar_rejected() {
        assert!(Scalar::<NistP256>::from_bytes(&[0xff; 32]).is_err());
        let q = NistP256::order().to_bytes_be();
        assert!(Scalar::<NistP256>::from_bytes(&q).is_err());
    }

    #[test]
    fn curve_id_parses() {
        assert_eq!("p256".parse::<CurveId>().unwrap(), CurveId::P256);
        assert_eq!("secp256k1".parse::<CurveId>().unwrap(), CurveId::Secp256k1);
        assert!("ed25519".parse::<CurveId>().is_err());
    }
}
