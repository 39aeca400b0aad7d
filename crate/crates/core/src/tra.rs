//! Trace authority: pseudo-ID issuance and identity recovery.
//!
//! A pseudo-ID is ⟨PID1, PID2, T⟩ with PID1 = λP chosen by the vehicle and
//! PID2 = RID ⊕ H1(β·PID1, PID1, T). RID is left-padded with zeros to the
//! scalar width before masking, so a trace under the wrong key is detected by
//! nonzero padding.

use rand_core::{CryptoRng, RngCore};

use crate::encoding::{Decoder, Encode, Timestamp, ValidityPeriod};
use crate::error::{Error, Result};
use crate::group::{Curve, GroupPoint, NistP256, Scalar};
use crate::hash::{domain, h1, xor};
use crate::params::SystemParams;

/// A vehicle's real identity (plate number, VIN, ...).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RealIdentity(Vec<u8>);

impl RealIdentity {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Self {
        RealIdentity(bytes.into())
    }

    /// Right-pads or truncates a label to exactly `len` bytes.
    pub fn from_label(label: &str, len: usize) -> Self {
        let mut bytes = label.as_bytes().to_vec();
        bytes.resize(len, b' ');
        RealIdentity(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

/// The three-part vehicle pseudonym.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PseudoId<C: Curve = NistP256> {
    /// PID1 = λP.
    pub anchor: GroupPoint<C>,
    /// PID2, the masked real identity; exactly one scalar width long.
    pub masked_id: Vec<u8>,
    /// T, the validity period.
    pub validity: ValidityPeriod,
}

impl<C: Curve> PseudoId<C> {
    pub fn is_valid_at(&self, now: Timestamp) -> bool {
        self.validity.contains(now)
    }

    /// Wire format: encode(PID1) ‖ PID2 ‖ encode(T.start) ‖ encode(T.end).
    pub fn to_wire(&self) -> Vec<u8> {
        self.encode()
    }

    pub fn from_wire(bytes: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(bytes);
        let pid = Self::decode(&mut d)?;
        d.finish()?;
        Ok(pid)
    }

    pub fn decode(d: &mut Decoder<'_, C>) -> Result<Self> {
        let anchor = d.point()?;
        if anchor.is_identity() {
            return Err(Error::IdentityPoint("PID1"));
        }
        let masked_id = d.raw(C::scalar_len())?.to_vec();
        let validity = d.validity()?;
        Ok(PseudoId { anchor, masked_id, validity })
    }
}

impl<C: Curve> Encode<C> for PseudoId<C> {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.anchor.encode_into(out);
        out.extend_from_slice(&self.masked_id);
        Encode::<C>::encode_into(&self.validity, out);
    }
}

/// `check_pid_validity`: inclusive validity check.
pub fn check_pid_validity<C: Curve>(pid: &PseudoId<C>, now: Timestamp) -> bool {
    pid.is_valid_at(now)
}

/// Vehicle side of pseudo-ID generation: a fresh λ and PID1 = λP. λ stays
/// with the vehicle.
pub fn request_pseudonym<C: Curve>(rng: &mut (impl RngCore + CryptoRng)) -> (Scalar<C>, GroupPoint<C>) {
    let lambda = Scalar::random_nonzero(rng);
    (lambda, GroupPoint::mul_base(&lambda))
}

/// β and T_pub = βP.
#[derive(Clone)]
pub struct TraceKey<C: Curve = NistP256> {
    secret: Scalar<C>,
    public: GroupPoint<C>,
}

impl<C: Curve> std::fmt::Debug for TraceKey<C> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TraceKey").field("public", &self.public).finish_non_exhaustive()
    }
}

impl<C: Curve> TraceKey<C> {
    pub fn generate(rng: &mut (impl RngCore + CryptoRng)) -> Self {
        Self::from_secret(Scalar::random_nonzero(rng))
    }

    pub fn from_secret(secret: Scalar<C>) -> Self {
        assert!(!secret.is_zero(), "trace key must be nonzero");
        TraceKey { secret, public: GroupPoint::mul_base(&secret) }
    }

    pub fn public(&self) -> GroupPoint<C> {
        self.public
    }

    fn mask(&self, anchor: &GroupPoint<C>, validity: &ValidityPeriod) -> Vec<u8> {
        let shared = anchor.mul(&self.secret);
        h1(domain::PSEUDONYM, &[&shared, anchor, validity]).to_bytes()
    }

    pub fn issue_pid(
        &self,
        params: &SystemParams<C>,
        rid: &RealIdentity,
        anchor: &GroupPoint<C>,
        validity: ValidityPeriod,
    ) -> Result<PseudoId<C>> {
        if anchor.is_identity() {
            return Err(Error::IdentityPoint("PID1"));
        }
        if rid.0.len() != params.id_len {
            return Err(Error::IdentityLength { expected: params.id_len, actual: rid.0.len() });
        }
        let width = C::scalar_len();
        let mut padded = vec![0u8; width];
        padded[width - rid.0.len()..].copy_from_slice(&rid.0);
        let masked_id = xor(&padded, &self.mask(anchor, &validity));
        Ok(PseudoId { anchor: *anchor, masked_id, validity })
    }

    /// Recovers the real identity behind `pid`.
    pub fn trace(&self, params: &SystemParams<C>, pid: &PseudoId<C>) -> Result<RealIdentity> {
        let width = C::scalar_len();
        if pid.masked_id.len() != width {
            return Err(Error::Decode("PID2 width"));
        }
        let padded = xor(&pid.masked_id, &self.mask(&pid.anchor, &pid.validity));
        let (padding, rid) = padded.split_at(width - params.id_len);
        if padding.iter().any(|&b| b != 0) {
            return Err(Error::TraceMismatch);
        }
        Ok(RealIdentity(rid.to_vec()))
    }
}
