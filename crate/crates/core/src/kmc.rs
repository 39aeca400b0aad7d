//! Key management center: master key, certificateless partial keys for
//! vehicles, and certificates for RSUs.
//!
//! Key delivery "over a secure channel" is a direct call; the KMC is modeled
//! as honest-but-curious.

use rand_core::{CryptoRng, RngCore};

use crate::encoding::{Decoder, Encode};
use crate::error::{Error, Result};
use crate::group::{Curve, GroupPoint, NistP256, Scalar};
use crate::hash::{domain, h1};
use crate::params::SystemParams;
use crate::schnorr::{self, SchnorrSignature};
use crate::tra::PseudoId;

/// s and P_pub = sP.
#[derive(Clone)]
pub struct MasterKey<C: Curve = NistP256> {
    secret: Scalar<C>,
    public: GroupPoint<C>,
}

impl<C: Curve> std::fmt::Debug for MasterKey<C> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MasterKey").field("public", &self.public).finish_non_exhaustive()
    }
}

/// ⟨Y_i, y_i⟩ with y_i = k_i + s·Q_i.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartialKey<C: Curve = NistP256> {
    pub public: GroupPoint<C>,
    pub private: Scalar<C>,
}

/// Q_i = H1(PID_i, Y_i).
pub fn partial_key_hash<C: Curve>(pid: &PseudoId<C>, partial_public: &GroupPoint<C>) -> Scalar<C> {
    h1(domain::PARTIAL_KEY, &[pid, partial_public])
}

/// Checks y_i·P = Y_i + Q_i·P_pub.
pub fn check_partial_key<C: Curve>(params: &SystemParams<C>, pid: &PseudoId<C>, key: &PartialKey<C>) -> bool {
    let q = partial_key_hash(pid, &key.public);
    GroupPoint::mul_base(&key.private) == key.public + params.master_public.mul(&q)
}

/// Anything that can hand a vehicle its partial key.
pub trait PartialKeyIssuer<C: Curve> {
    fn issue_partial_key<R: RngCore + CryptoRng>(&self, pid: &PseudoId<C>, rng: &mut R) -> PartialKey<C>;
}

/// Anything that can certify an RSU public key.
pub trait CertificateIssuer<C: Curve> {
    fn issue_rsu_cert<R: RngCore + CryptoRng>(
        &self,
        id: &[u8],
        public: &GroupPoint<C>,
        rng: &mut R,
    ) -> Result<RsuCertificate<C>>;
}

impl<C: Curve> MasterKey<C> {
    pub fn generate(rng: &mut (impl RngCore + CryptoRng)) -> Self {
        Self::from_secret(Scalar::random_nonzero(rng))
    }

    pub fn from_secret(secret: Scalar<C>) -> Self {
        assert!(!secret.is_zero(), "master key must be nonzero");
        MasterKey { secret, public: GroupPoint::mul_base(&secret) }
    }

    pub fn public(&self) -> GroupPoint<C> {
        self.public
    }

    #[cfg(test)]
    pub(crate) fn secret(&self) -> Scalar<C> {
        self.secret
    }
}

impl<C: Curve> PartialKeyIssuer<C> for MasterKey<C> {
    fn issue_partial_key<R: RngCore + CryptoRng>(&self, pid: &PseudoId<C>, rng: &mut R) -> PartialKey<C> {
        let k = Scalar::random_nonzero(rng);
        let public = GroupPoint::mul_base(&k);
        let q = partial_key_hash(pid, &public);
        PartialKey { public, private: k + self.secret * q }
    }
}

impl<C: Curve> CertificateIssuer<C> for MasterKey<C> {
    fn issue_rsu_cert<R: RngCore + CryptoRng>(
        &self,
        id: &[u8],
        public: &GroupPoint<C>,
        rng: &mut R,
    ) -> Result<RsuCertificate<C>> {
        if public.is_identity() {
            return Err(Error::IdentityPoint("RSU public key"));
        }
        let msg = RsuCertificate::signed_bytes(id, public);
        let signature = schnorr::sign(&self.secret, &msg, rng);
        Ok(RsuCertificate { id: id.to_vec(), public_key: *public, signature })
    }
}

/// cert_R = ⟨ID_R, Y_R, Sig_R⟩.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsuCertificate<C: Curve = NistP256> {
    pub id: Vec<u8>,
    pub public_key: GroupPoint<C>,
    pub signature: SchnorrSignature<C>,
}

impl<C: Curve> RsuCertificate<C> {
    fn signed_bytes(id: &[u8], public: &GroupPoint<C>) -> Vec<u8> {
        let mut msg = Encode::<C>::encode(id);
        public.encode_into(&mut msg);
        msg
    }

    pub fn verify(&self, master_public: &GroupPoint<C>) -> bool {
        !self.public_key.is_identity()
            && schnorr::verify(master_public, &Self::signed_bytes(&self.id, &self.public_key), &self.signature)
    }

    /// Wire format: encode(ID_R) ‖ encode(Y_R) ‖ encode(R) ‖ encode(s).
    pub fn to_wire(&self) -> Vec<u8> {
        self.encode()
    }

    pub fn from_wire(bytes: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(bytes);
        let cert = Self::decode(&mut d)?;
        d.finish()?;
        Ok(cert)
    }

    pub fn decode(d: &mut Decoder<'_, C>) -> Result<Self> {
        Ok(RsuCertificate {
            id: d.bytes()?.to_vec(),
            public_key: d.point()?,
            signature: SchnorrSignature::decode(d)?,
        })
    }
}

impl<C: Curve> Encode<C> for RsuCertificate<C> {
    fn encode_into(&self, out: &mut Vec<u8>) {
        Encode::<C>::encode_into(&self.id, out);
        self.public_key.encode_into(out);
        self.signature.encode_into(out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::ValidityPeriod;
    use crate::tra::{request_pseudonym, RealIdentity, TraceKey};
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;

    type C = NistP256;

    struct Fixture {
        rng: ChaCha20Rng,
        mk: MasterKey<C>,
        tk: TraceKey<C>,
        params: SystemParams<C>,
    }

    fn fixture(seed: u64) -> Fixture {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mk = MasterKey::generate(&mut rng);
        let tk = TraceKey::generate(&mut rng);
        let params = SystemParams::new(mk.public(), tk.public(), 256, 16).unwrap();
        Fixture { rng, mk, tk, params }
    }

    fn pid(f: &mut Fixture) -> PseudoId<C> {
        let (_, anchor) = request_pseudonym(&mut f.rng);
        f.tk.issue_pid(&f.params, &RealIdentity::new(vec![9u8; 16]), &anchor, ValidityPeriod::new(0, 100)).unwrap()
    }

    #[test]
    fn setup_is_deterministic_under_seed() {
        let a = MasterKey::<C>::generate(&mut ChaCha20Rng::seed_from_u64(77));
        let b = MasterKey::<C>::generate(&mut ChaCha20Rng::seed_from_u64(77));
        assert_eq!(a.public(), b.public());
        assert!(!a.public().is_identity());
        assert_eq!(GroupPoint::mul_base(&a.secret()), a.public());
    }

    #[test]
    fn partial_keys_satisfy_validity_equation() {
        let mut f = fixture(1);
        for _ in 0..100 {
            let pid = pid(&mut f);
            let key = f.mk.issue_partial_key(&pid, &mut f.rng);
            assert!(check_partial_key(&f.params, &pid, &key));
        }
    }

    #[test]
    fn reissuance_uses_fresh_randomness() {
        let mut f = fixture(2);
        let pid = pid(&mut f);
        let a = f.mk.issue_partial_key(&pid, &mut f.rng);
        let b = f.mk.issue_partial_key(&pid, &mut f.rng);
        assert_ne!(a.public, b.public);
        // a third party recomputes Q from public data only
        let q = partial_key_hash(&pid, &a.public);
        assert_eq!(GroupPoint::mul_base(&a.private), a.public + f.params.master_public.mul(&q));
    }

    #[test]
    fn certificate_round_trip_and_tamper() {
        let mut f = fixture(3);
        let y_r = GroupPoint::mul_base(&Scalar::random_nonzero(&mut f.rng));
        let cert = f.mk.issue_rsu_cert(b"RSU-0042", &y_r, &mut f.rng).unwrap();
        assert!(cert.verify(&f.params.master_public));

        let mut swapped = cert.clone();
        swapped.public_key = GroupPoint::mul_base(&Scalar::random_nonzero(&mut f.rng));
        assert!(!swapped.verify(&f.params.master_public));

        let mut truncated = cert.clone();
        truncated.id.pop();
        assert!(!truncated.verify(&f.params.master_public));

        assert_eq!(RsuCertificate::<C>::from_wire(&cert.to_wire()).unwrap(), cert);
    }

    #[test]
    fn certificate_rejects_identity_key() {
        let mut f = fixture(4);
        assert!(f.mk.issue_rsu_cert(b"R", &GroupPoint::identity(), &mut f.rng).is_err());
    }

    #[test]
    fn non_master_signatures_never_verify() {
        let mut f = fixture(5);
        let y_r = GroupPoint::mul_base(&Scalar::random_nonzero(&mut f.rng));
        for _ in 0..50 {
            let rogue = MasterKey::<C>::generate(&mut f.rng);
            let cert = rogue.issue_rsu_cert(b"RSU-X", &y_r, &mut f.rng).unwrap();
            assert!(!cert.verify(&f.params.master_public));
        }
    }
}
