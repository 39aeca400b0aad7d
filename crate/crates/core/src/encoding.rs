//! Canonical, injective byte encoding.
//!
//! Every item is a one-byte type tag followed by its payload:
//!
//! | tag  | item        | payload                                    |
//! |------|-------------|--------------------------------------------|
//! | 0x01 | scalar      | fixed-width big-endian                     |
//! | 0x02 | point       | compressed, parity-prefixed (identity = 0s) |
//! | 0x03 | byte string | 4-byte big-endian length, then bytes       |
//! | 0x04 | timestamp   | 8-byte big-endian seconds                  |
//!
//! These item encodings are the building blocks of every wire format and the
//! input to the protocol hashes.

use std::marker::PhantomData;

use crate::error::{Error, Result};
use crate::group::{Curve, GroupPoint, Scalar};

pub const TAG_SCALAR: u8 = 0x01;
pub const TAG_POINT: u8 = 0x02;
pub const TAG_BYTES: u8 = 0x03;
pub const TAG_TIME: u8 = 0x04;

/// Seconds-resolution protocol timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn abs_diff(self, other: Timestamp) -> u64 {
        self.0.abs_diff(other.0)
    }
}

/// Inclusive validity window of a pseudo-ID.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ValidityPeriod {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl ValidityPeriod {
    pub fn new(start: u64, end: u64) -> Self {
        ValidityPeriod { start: Timestamp(start), end: Timestamp(end) }
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t <= self.end
    }
}

/// Values with a canonical encoding over curve `C`.
pub trait Encode<C: Curve> {
    fn encode_into(&self, out: &mut Vec<u8>);

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }
}

impl<C: Curve> Encode<C> for Scalar<C> {
    fn encode_into(&self, out: &mut Vec<u8>) {
        out.push(TAG_SCALAR);
        out.extend_from_slice(&self.to_bytes());
    }
}

impl<C: Curve> Encode<C> for GroupPoint<C> {
    fn encode_into(&self, out: &mut Vec<u8>) {
        out.push(TAG_POINT);
        out.extend_from_slice(&self.to_bytes());
    }
}

impl<C: Curve> Encode<C> for [u8] {
    fn encode_into(&self, out: &mut Vec<u8>) {
        let len = u32::try_from(self.len()).expect("byte string under 4 GiB");
        out.push(TAG_BYTES);
        out.extend_from_slice(&len.to_be_bytes());
        out.extend_from_slice(self);
    }
}

impl<C: Curve, T: Encode<C> + ?Sized> Encode<C> for &T {
    fn encode_into(&self, out: &mut Vec<u8>) {
        (**self).encode_into(out)
    }
}

impl<C: Curve> Encode<C> for Vec<u8> {
    fn encode_into(&self, out: &mut Vec<u8>) {
        <[u8] as Encode<C>>::encode_into(self, out)
    }
}

impl<C: Curve> Encode<C> for Timestamp {
    fn encode_into(&self, out: &mut Vec<u8>) {
        out.push(TAG_TIME);
        out.extend_from_slice(&self.0.to_be_bytes());
    }
}

impl<C: Curve> Encode<C> for ValidityPeriod {
    fn encode_into(&self, out: &mut Vec<u8>) {
        <Timestamp as Encode<C>>::encode_into(&self.start, out);
        <Timestamp as Encode<C>>::encode_into(&self.end, out);
    }
}

/// Cursor over canonical encodings.
pub struct Decoder<'a, C: Curve> {
    buf: &'a [u8],
    _curve: PhantomData<C>,
}

impl<'a, C: Curve> Decoder<'a, C> {
    pub fn new(buf: &'a [u8]) -> Self {
        Decoder { buf, _curve: PhantomData }
    }

    pub fn raw(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Decode("truncated input"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn tag(&mut self, expected: u8) -> Result<()> {
        if self.raw(1)?[0] != expected {
            return Err(Error::Decode("unexpected type tag"));
        }
        Ok(())
    }

    pub fn scalar(&mut self) -> Result<Scalar<C>> {
        self.tag(TAG_SCALAR)?;
        Scalar::from_bytes(self.raw(C::scalar_len())?)
    }

    pub fn point(&mut self) -> Result<GroupPoint<C>> {
        self.tag(TAG_POINT)?;
        GroupPoint::from_bytes(self.raw(C::point_len())?)
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        self.tag(TAG_BYTES)?;
        let len = u32::from_be_bytes(self.raw(4)?.try_into().expect("4 bytes"));
        self.raw(len as usize)
    }

    pub fn time(&mut self) -> Result<Timestamp> {
        self.tag(TAG_TIME)?;
        Ok(Timestamp(u64::from_be_bytes(self.raw(8)?.try_into().expect("8 bytes"))))
    }

    pub fn validity(&mut self) -> Result<ValidityPeriod> {
        Ok(ValidityPeriod { start: self.time()?, end: self.time()? })
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// Fails if input remains.
    pub fn finish(self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(Error::Decode("trailing bytes"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::NistP256;
    use proptest::prelude::*;
    use rand_chacha::ChaCha20Rng;
    use rand_core::{RngCore, SeedableRng};
    use std::collections::HashMap;

    type C = NistP256;

    #[derive(Debug, Clone, PartialEq)]
    enum Value {
        Scalar(Scalar<C>),
        Point(GroupPoint<C>),
        Bytes(Vec<u8>),
        Time(Timestamp),
    }

    fn enc(v: &Value) -> Vec<u8> {
        match v {
            Value::Scalar(s) => Encode::<C>::encode(s),
            Value::Point(p) => Encode::<C>::encode(p),
            Value::Bytes(b) => Encode::<C>::encode(b),
            Value::Time(t) => Encode::<C>::encode(t),
        }
    }

    #[test]
    fn scalar_one_is_fixed_width() {
        let bytes = Scalar::<C>::one().to_bytes();
        assert_eq!(bytes.len(), 32);
        assert_eq!(bytes[31], 0x01);
        assert!(bytes[..31].iter().all(|&b| b == 0));
        assert_eq!(Encode::<C>::encode(&Scalar::<C>::one()).len(), 33);
    }

    #[test]
    fn type_tags_separate_identical_payloads() {
        let p = GroupPoint::<C>::generator();
        let payload = p.to_bytes();
        let as_point = Encode::<C>::encode(&p);
        let as_bytes = Encode::<C>::encode(&payload);
        assert_ne!(as_point, as_bytes);
        assert_eq!(&as_point[1..], &payload[..]);

        let s = Scalar::<C>::from_u64(7);
        let time = Encode::<C>::encode(&Timestamp(7));
        assert_ne!(Encode::<C>::encode(&s)[0], time[0]);
    }

    #[test]
    fn random_collision_search_finds_none() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let mut seen: HashMap<Vec<u8>, Value> = HashMap::new();
        for i in 0..10_000u32 {
            let v = match i % 4 {
                0 => Value::Scalar(Scalar::from_u64(rng.next_u64() % 512)),
                1 => Value::Point(GroupPoint::mul_base(&Scalar::from_u64(rng.next_u64() % 512))),
                2 => {
                    let mut b = vec![0u8; (rng.next_u32() % 4) as usize];
                    rng.fill_bytes(&mut b);
                    Value::Bytes(b)
                }
                _ => Value::Time(Timestamp(rng.next_u64() % 512)),
            };
            let e = enc(&v);
            if let Some(prev) = seen.get(&e) {
                assert_eq!(prev, &v, "distinct values share an encoding");
            }
            seen.insert(e, v);
        }
        // small domains above force plenty of exact repeats
        assert!(seen.len() < 10_000);
    }

    #[test]
    fn decoder_rejects_truncation_and_trailing() {
        let mut buf = Encode::<C>::encode(&Timestamp(9));
        let mut d = Decoder::<C>::new(&buf[..5]);
        assert!(d.time().is_err());
        buf.push(0);
        let mut d = Decoder::<C>::new(&buf);
        assert_eq!(d.time().unwrap(), Timestamp(9));
        assert!(d.finish().is_err());
    }

    proptest! {
        #[test]
        fn item_round_trip(x in any::<u64>(), t in any::<u64>(), b in proptest::collection::vec(any::<u8>(), 0..64)) {
            let s = Scalar::<C>::from_u64(x);
            let p = GroupPoint::<C>::mul_base(&s);
            let mut buf = Vec::new();
            s.encode_into(&mut buf);
            p.encode_into(&mut buf);
            Encode::<C>::encode_into(&b, &mut buf);
            Encode::<C>::encode_into(&Timestamp(t), &mut buf);
            let mut d = Decoder::<C>::new(&buf);
            prop_assert_eq!(d.scalar().unwrap(), s);
            prop_assert_eq!(d.point().unwrap(), p);
            prop_assert_eq!(d.bytes().unwrap(), &b[..]);
            prop_assert_eq!(d.time().unwrap(), Timestamp(t));
            prop_assert!(d.finish().is_ok());
        }
    }
}
