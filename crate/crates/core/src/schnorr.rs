//! Schnorr signatures over the protocol group, used for RSU certificates and
//! beacons.

use rand_core::{CryptoRng, RngCore};

use crate::encoding::{Decoder, Encode};
use crate::error::Result;
use crate::group::{Curve, GroupPoint, NistP256, Scalar};
use crate::hash::{domain, h1};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchnorrSignature<C: Curve = NistP256> {
    pub commitment: GroupPoint<C>,
    pub response: Scalar<C>,
}

fn challenge<C: Curve>(commitment: &GroupPoint<C>, msg: &[u8]) -> Scalar<C> {
    h1(domain::SCHNORR, &[commitment, &msg])
}

/// Signs `msg`: R = kP, s = k + h1(R, msg)·sk.
pub fn sign<C: Curve>(sk: &Scalar<C>, msg: &[u8], rng: &mut (impl RngCore + CryptoRng)) -> SchnorrSignature<C> {
    debug_assert!(!sk.is_zero());
    let nonce = Scalar::random_nonzero(rng);
    let commitment = GroupPoint::mul_base(&nonce);
    let response = nonce + challenge(&commitment, msg) * *sk;
    SchnorrSignature { commitment, response }
}

/// Accepts iff sP = R + h1(R, msg)·pk. Degenerate keys or commitments reject.
pub fn verify<C: Curve>(pk: &GroupPoint<C>, msg: &[u8], sig: &SchnorrSignature<C>) -> bool {
    if pk.is_identity() || sig.commitment.is_identity() {
        return false;
    }
    let e = challenge(&sig.commitment, msg);
    GroupPoint::mul_base(&sig.response) == sig.commitment + pk.mul(&e)
}

impl<C: Curve> Encode<C> for SchnorrSignature<C> {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.commitment.encode_into(out);
        self.response.encode_into(out);
    }
}

impl<C: Curve> SchnorrSignature<C> {
    pub fn decode(d: &mut Decoder<'_, C>) -> Result<Self> {
        Ok(SchnorrSignature { commitment: d.point()?, response: d.scalar()? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;

    type C = NistP256;

    fn keypair(rng: &mut ChaCha20Rng) -> (Scalar<C>, GroupPoint<C>) {
        let sk = Scalar::random_nonzero(rng);
        (sk, GroupPoint::mul_base(&sk))
    }

    #[test]
    fn round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (sk, pk) = keypair(&mut rng);
        let sig = sign(&sk, b"beacon", &mut rng);
        assert!(verify(&pk, b"beacon", &sig));
    }

    #[test]
    fn single_byte_flips_reject() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let (sk, pk) = keypair(&mut rng);
        let msg: Vec<u8> = (0..100u8).collect();
        let sig = sign(&sk, &msg, &mut rng);
        for i in 0..100 {
            let mut bad = msg.clone();
            bad[i] ^= 1 << (i % 8);
            assert!(!verify(&pk, &bad, &sig), "flip at byte {i}");
        }
    }

    #[test]
    fn wrong_key_rejects() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (sk, _) = keypair(&mut rng);
        let sig = sign(&sk, b"m", &mut rng);
        for _ in 0..50 {
            let (_, other) = keypair(&mut rng);
            assert!(!verify(&other, b"m", &sig));
        }
    }

    #[test]
    fn malformed_signature_rejects() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let (sk, pk) = keypair(&mut rng);
        let mut sig = sign(&sk, b"m", &mut rng);
        sig.commitment = GroupPoint::identity();
        assert!(!verify(&pk, b"m", &sig));
        assert!(!verify(&GroupPoint::identity(), b"m", &sign(&sk, b"m", &mut rng)));
    }

    #[test]
    fn encoding_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let (sk, _) = keypair(&mut rng);
        let sig = sign(&sk, b"m", &mut rng);
        let bytes = Encode::<C>::encode(&sig);
        let mut d = Decoder::new(&bytes);
        assert_eq!(SchnorrSignature::decode(&mut d).unwrap(), sig);
        d.finish().unwrap();
    }
}
