//! The two protocol hash functions.
//!
//! `h1` maps a domain tag and a list of encodable items into Z_q^*. The
//! SHA-512 digest of `len(tag) ‖ tag ‖ encode(item_1) ‖ … ‖ encode(item_k)` is
//! reduced mod q−1 and shifted up by one, so every output is invertible.
//!
//! `h2` expands a group element into an `out_bits`-bit keystream by SHA-256 in
//! counter mode.

use num_bigint::BigUint;
use sha2::{Digest, Sha256, Sha512};

use crate::counter;
use crate::encoding::Encode;
use crate::error::{Error, Result};
use crate::group::{Curve, GroupPoint, Scalar};

/// Domain tags for each use of `h1`.
pub mod domain {
    /// Pseudo-ID mask.
    pub const PSEUDONYM: &[u8] = b"pid";
    /// Schnorr challenge for certificates and beacons.
    pub const SCHNORR: &[u8] = b"cert";
    /// Q_i, binding a partial public key to its pseudo-ID.
    pub const PARTIAL_KEY: &[u8] = b"Q";
    /// h3, the multi-trapdoor hash of the vehicle's public material.
    pub const TRAPDOOR_HASH: &[u8] = b"h3";
    /// h4, the hash binding the ciphertext and ephemeral key.
    pub const COLLISION_HASH: &[u8] = b"h4";
    /// Hash of the beacon-scoped shared point η·Y_R.
    pub const BEACON_SECRET: &[u8] = b"eta";
}

const H2_TAG: &[u8] = b"H2";

/// Hash to a nonzero scalar. Counted as one H1 invocation.
pub fn h1<C: Curve>(tag: &[u8], items: &[&dyn Encode<C>]) -> Scalar<C> {
    counter::record(|c| c.hashes_h1 += 1);
    let tag_len = u8::try_from(tag.len()).expect("domain tag under 256 bytes");
    let mut hasher = Sha512::new();
    hasher.update([tag_len]);
    hasher.update(tag);
    let mut buf = Vec::with_capacity(64);
    for item in items {
        buf.clear();
        item.encode_into(&mut buf);
        hasher.update(&buf);
    }
    let wide = BigUint::from_bytes_be(&hasher.finalize());
    let q_minus_one = C::order() - 1u32;
    Scalar::from_biguint(&(wide % q_minus_one + 1u32))
}

/// Keystream of exactly `out_bits` bits derived from `point`. Counted as one
/// H2 invocation.
///
/// The identity is rejected: it signals a degenerate Diffie-Hellman product.
pub fn h2<C: Curve>(point: &GroupPoint<C>, out_bits: usize) -> Result<Vec<u8>> {
    if point.is_identity() {
        return Err(Error::IdentityPoint("h2 input"));
    }
    if out_bits == 0 || !out_bits.is_multiple_of(8) {
        return Err(Error::InvalidParams(format!("h2 output length {out_bits} is not a positive multiple of 8")));
    }
    counter::record(|c| c.hashes_h2 += 1);
    let encoded = Encode::<C>::encode(point);
    let out_len = out_bits / 8;
    let mut out = Vec::with_capacity(out_len + 32);
    let mut block: u32 = 0;
    while out.len() < out_len {
        let mut hasher = Sha256::new();
        hasher.update([H2_TAG.len() as u8]);
        hasher.update(H2_TAG);
        hasher.update(&encoded);
        hasher.update(block.to_be_bytes());
        out.extend_from_slice(&hasher.finalize());
        block += 1;
    }
    out.truncate(out_len);
    Ok(out)
}

/// XORs `data` with `keystream` of the same length.
pub(crate) fn xor(data: &[u8], keystream: &[u8]) -> Vec<u8> {
    debug_assert_eq!(data.len(), keystream.len());
    data.iter().zip(keystream).map(|(a, b)| a ^ b).collect()
}
