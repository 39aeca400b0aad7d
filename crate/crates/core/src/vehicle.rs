//! OBU side: certificateless registration, beacon validation and
//! signcryption of traffic reports.

use rand_core::{CryptoRng, RngCore};

use crate::encoding::{Decoder, Encode, Timestamp, ValidityPeriod};
use crate::error::{Error, Result};
use crate::group::{Curve, GroupPoint, NistP256, Scalar};
use crate::hash::{domain, h1, h2, xor};
use crate::kmc::{check_partial_key, PartialKey, PartialKeyIssuer, RsuCertificate};
use crate::params::SystemParams;
use crate::schnorr::{self, SchnorrSignature};
use crate::tra::{request_pseudonym, PseudoId, RealIdentity, TraceKey};

/// Default beacon freshness window in seconds.
pub const DEFAULT_FRESHNESS_WINDOW: u64 = 300;

/// Full private key ⟨y, l⟩ and full public key ⟨Y, L⟩ bound to a pseudo-ID.
#[derive(Clone)]
pub struct VehicleKeys<C: Curve = NistP256> {
    pub(crate) partial_private: Scalar<C>,
    pub(crate) secret_value: Scalar<C>,
    pub partial_public: GroupPoint<C>,
    pub secret_public: GroupPoint<C>,
    pub pid: PseudoId<C>,
}

impl<C: Curve> std::fmt::Debug for VehicleKeys<C> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VehicleKeys")
            .field("partial_public", &self.partial_public)
            .field("secret_public", &self.secret_public)
            .field("pid", &self.pid)
            .finish_non_exhaustive()
    }
}

impl<C: Curve> VehicleKeys<C> {
    /// Completes registration from a partial key received from the KMC.
    ///
    /// The partial key is checked against y·P = Y + Q·P_pub before use; a
    /// failure means a corrupted channel or a misbehaving KMC.
    pub fn from_partial_key(
        params: &SystemParams<C>,
        pid: PseudoId<C>,
        partial: PartialKey<C>,
        rng: &mut (impl RngCore + CryptoRng),
    ) -> Result<Self> {
        if partial.public.is_identity() || !check_partial_key(params, &pid, &partial) {
            return Err(Error::PartialKeyInvalid);
        }
        let secret_value = Scalar::random_nonzero(rng);
        Ok(VehicleKeys {
            partial_private: partial.private,
            secret_value,
            partial_public: partial.public,
            secret_public: GroupPoint::mul_base(&secret_value),
            pid,
        })
    }

    /// Re-checks both key invariants: L = lP and yP = Y + Q·P_pub.
    pub fn is_consistent(&self, params: &SystemParams<C>) -> bool {
        let partial = PartialKey { public: self.partial_public, private: self.partial_private };
        GroupPoint::mul_base(&self.secret_value) == self.secret_public && check_partial_key(params, &self.pid, &partial)
    }
}

/// Registers a vehicle under `pid` with the KMC.
pub fn register<C: Curve, K: PartialKeyIssuer<C>>(
    params: &SystemParams<C>,
    pid: PseudoId<C>,
    kmc: &K,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<VehicleKeys<C>> {
    let partial = kmc.issue_partial_key(&pid, rng);
    VehicleKeys::from_partial_key(params, pid, partial, rng)
}

/// The RSU beacon ⟨cert_R, η, Sig(η, tt_R)⟩.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BroadcastPacket<C: Curve = NistP256> {
    pub cert: RsuCertificate<C>,
    pub eta: Scalar<C>,
    pub timestamp: Timestamp,
    pub signature: SchnorrSignature<C>,
}

impl<C: Curve> BroadcastPacket<C> {
    pub(crate) fn signed_bytes(eta: &Scalar<C>, timestamp: Timestamp) -> Vec<u8> {
        let mut msg = eta.encode();
        Encode::<C>::encode_into(&timestamp, &mut msg);
        msg
    }

    /// Wire format: cert-wire ‖ encode(η) ‖ encode(tt_R) ‖ encode(R) ‖ encode(s).
    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = self.cert.to_wire();
        self.eta.encode_into(&mut out);
        Encode::<C>::encode_into(&self.timestamp, &mut out);
        self.signature.encode_into(&mut out);
        out
    }

    pub fn from_wire(bytes: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(bytes);
        let pkt = BroadcastPacket {
            cert: RsuCertificate::decode(&mut d)?,
            eta: d.scalar()?,
            timestamp: d.time()?,
            signature: SchnorrSignature::decode(&mut d)?,
        };
        d.finish()?;
        Ok(pkt)
    }
}

/// Accepts iff the certificate verifies under P_pub, the beacon signature
/// verifies under the certified key, η is nonzero, and the beacon is within
/// `freshness_window` seconds of `now`.
pub fn validate_broadcast<C: Curve>(
    pkt: &BroadcastPacket<C>,
    master_public: &GroupPoint<C>,
    now: Timestamp,
    freshness_window: u64,
) -> bool {
    now.abs_diff(pkt.timestamp) <= freshness_window
        && !pkt.eta.is_zero()
        && pkt.cert.verify(master_public)
        && schnorr::verify(
            &pkt.cert.public_key,
            &BroadcastPacket::signed_bytes(&pkt.eta, pkt.timestamp),
            &pkt.signature,
        )
}

/// σ = ⟨t, c, X, Y, L, PID, tt⟩.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigncryptedMessage<C: Curve = NistP256> {
    pub t: Scalar<C>,
    pub ciphertext: Vec<u8>,
    pub ephemeral: GroupPoint<C>,
    pub partial_public: GroupPoint<C>,
    pub secret_public: GroupPoint<C>,
    pub pid: PseudoId<C>,
    pub timestamp: Timestamp,
}

impl<C: Curve> SigncryptedMessage<C> {
    /// Wire format: encode(t) ‖ c ‖ encode(X) ‖ encode(Y) ‖ encode(L) ‖
    /// pid-wire ‖ encode(tt).
    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = self.t.encode();
        out.extend_from_slice(&self.ciphertext);
        self.ephemeral.encode_into(&mut out);
        self.partial_public.encode_into(&mut out);
        self.secret_public.encode_into(&mut out);
        self.pid.encode_into(&mut out);
        Encode::<C>::encode_into(&self.timestamp, &mut out);
        out
    }

    /// Parses σ; `message_len` is l_m/8. Points are checked to be on the
    /// curve and not the identity.
    pub fn from_wire(bytes: &[u8], message_len: usize) -> Result<Self> {
        let mut d = Decoder::new(bytes);
        let t = d.scalar()?;
        let ciphertext = d.raw(message_len)?.to_vec();
        let ephemeral = d.point()?;
        let partial_public = d.point()?;
        let secret_public = d.point()?;
        if ephemeral.is_identity() || partial_public.is_identity() || secret_public.is_identity() {
            return Err(Error::IdentityPoint("σ public component"));
        }
        let pid = PseudoId::decode(&mut d)?;
        let timestamp = d.time()?;
        d.finish()?;
        Ok(SigncryptedMessage { t, ciphertext, ephemeral, partial_public, secret_public, pid, timestamp })
    }

    /// Byte ranges of each field within [`Self::to_wire`], in wire order.
    pub fn wire_layout(message_len: usize) -> Vec<(WireField, std::ops::Range<usize>)> {
        let scalar = 1 + C::scalar_len();
        let point = 1 + C::point_len();
        let fields = [
            (WireField::T, scalar),
            (WireField::Ciphertext, message_len),
            (WireField::Ephemeral, point),
            (WireField::PartialPublic, point),
            (WireField::SecretPublic, point),
            (WireField::PidAnchor, point),
            (WireField::PidMask, C::scalar_len()),
            (WireField::PidValidity, 18),
            (WireField::Timestamp, 9),
        ];
        let mut at = 0;
        fields
            .into_iter()
            .map(|(f, len)| {
                let r = at..at + len;
                at += len;
                (f, r)
            })
            .collect()
    }
}

/// Named fields of the σ wire format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WireField {
    T,
    Ciphertext,
    Ephemeral,
    PartialPublic,
    SecretPublic,
    PidAnchor,
    PidMask,
    PidValidity,
    Timestamp,
}

/// h3 = H1(PID, Y, L, tt).
pub(crate) fn trapdoor_hash<C: Curve>(
    pid: &PseudoId<C>,
    partial_public: &GroupPoint<C>,
    secret_public: &GroupPoint<C>,
    tt: Timestamp,
) -> Scalar<C> {
    h1(domain::TRAPDOOR_HASH, &[pid, partial_public, secret_public, &tt])
}

/// h4 = H1(c, X, cert_R, tt).
pub(crate) fn collision_hash<C: Curve>(
    ciphertext: &[u8],
    ephemeral: &GroupPoint<C>,
    cert: &RsuCertificate<C>,
    tt: Timestamp,
) -> Scalar<C> {
    h1(domain::COLLISION_HASH, &[&ciphertext, ephemeral, cert, &tt])
}

/// H1 of the beacon-scoped shared point η·Y_R = γη·P.
pub(crate) fn beacon_secret_hash<C: Curve>(shared: &GroupPoint<C>) -> Scalar<C> {
    h1(domain::BEACON_SECRET, &[shared])
}

/// Signcrypts one fixed-length traffic report for the RSU behind `pkt`.
///
/// The caller must have accepted `pkt` with [`validate_broadcast`]. Performs
/// three scalar multiplications (xP, x·Y_R, η·Y_R), three H1 and one H2.
pub fn signcrypt<C: Curve>(
    params: &SystemParams<C>,
    keys: &VehicleKeys<C>,
    pkt: &BroadcastPacket<C>,
    message: &[u8],
    tt: Timestamp,
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<SigncryptedMessage<C>> {
    if message.len() != params.message_len() {
        return Err(Error::MessageLength { expected: params.message_len(), actual: message.len() });
    }
    if !keys.pid.is_valid_at(tt) {
        return Err(Error::PseudonymExpired(tt.0));
    }
    let rsu_public = &pkt.cert.public_key;
    if rsu_public.is_identity() {
        return Err(Error::IdentityPoint("RSU public key"));
    }

    let (x, ephemeral, shared) = loop {
        let x = Scalar::random_nonzero(rng);
        let ephemeral = GroupPoint::mul_base(&x);
        let shared = rsu_public.mul(&x);
        if !shared.is_identity() {
            break (x, ephemeral, shared);
        }
    };
    let ciphertext = xor(message, &h2(&shared, params.message_bits)?);

    let h3 = trapdoor_hash(&keys.pid, &keys.partial_public, &keys.secret_public, tt);
    let h4 = collision_hash(&ciphertext, &ephemeral, &pkt.cert, tt);
    // ephemeral trapdoor key
    let z = pkt.eta * (h3 - h4) + (keys.partial_private + keys.secret_value);
    let beacon_secret = beacon_secret_hash(&rsu_public.mul(&pkt.eta));
    let t = x - beacon_secret * (z + keys.secret_value);

    Ok(SigncryptedMessage {
        t,
        ciphertext,
        ephemeral,
        partial_public: keys.partial_public,
        secret_public: keys.secret_public,
        pid: keys.pid.clone(),
        timestamp: tt,
    })
}

/// A vehicle's long-lived state: its real identity, the current pseudonym
/// secret λ, and the key material bound to the current pseudo-ID.
#[derive(Debug, Clone)]
pub struct Vehicle<C: Curve = NistP256> {
    rid: RealIdentity,
    lambda: Scalar<C>,
    keys: VehicleKeys<C>,
}

impl<C: Curve> Vehicle<C> {
    /// Pseudo-ID generation followed by registration.
    pub fn enroll<K: PartialKeyIssuer<C>>(
        params: &SystemParams<C>,
        rid: RealIdentity,
        tra: &TraceKey<C>,
        kmc: &K,
        validity: ValidityPeriod,
        rng: &mut (impl RngCore + CryptoRng),
    ) -> Result<Self> {
        let (lambda, anchor) = request_pseudonym(rng);
        let pid = tra.issue_pid(params, &rid, &anchor, validity)?;
        let keys = register(params, pid, kmc, rng)?;
        Ok(Vehicle { rid, lambda, keys })
    }

    /// Switches to a fresh pseudonym and fresh registration keys. Nothing but
    /// the TRA's records links the old and new material.
    pub fn refresh_pseudonym<K: PartialKeyIssuer<C>>(
        &mut self,
        params: &SystemParams<C>,
        tra: &TraceKey<C>,
        kmc: &K,
        validity: ValidityPeriod,
        rng: &mut (impl RngCore + CryptoRng),
    ) -> Result<&VehicleKeys<C>> {
        *self = Self::enroll(params, self.rid.clone(), tra, kmc, validity, rng)?;
        Ok(&self.keys)
    }

    pub fn keys(&self) -> &VehicleKeys<C> {
        &self.keys
    }

    pub fn pid(&self) -> &PseudoId<C> {
        &self.keys.pid
    }

    pub fn real_identity(&self) -> &RealIdentity {
        &self.rid
    }

    /// PID1 = λP.
    pub fn pseudonym_anchor_matches(&self) -> bool {
        GroupPoint::mul_base(&self.lambda) == self.keys.pid.anchor
    }

    pub fn signcrypt(
        &self,
        params: &SystemParams<C>,
        pkt: &BroadcastPacket<C>,
        message: &[u8],
        tt: Timestamp,
        rng: &mut (impl RngCore + CryptoRng),
    ) -> Result<SigncryptedMessage<C>> {
        signcrypt(params, &self.keys, pkt, message, tt, rng)
    }
}
