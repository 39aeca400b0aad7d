//! RSU side: registration, beacons, aggregate verification and decryption.
//!
//! A batch of n signcrypted messages is accepted iff the multi-trapdoor hash
//! value V1 = η(Σh3)P + Σ(Y+L) equals the collision value
//! V2 = η(Σh4)P + Z − (ΣQ)P_pub, where Z = H1(γηP)⁻¹(X − tP) − L is the
//! ephemeral hash key. The check is evaluated as the single combination
//! V1 − V2 = O, costing five scalar multiplications for any n.

use std::collections::{HashSet, VecDeque};
use std::sync::Mutex;

use rand_core::{CryptoRng, RngCore};

use crate::counter::{measure, OpCounter};
use crate::encoding::{Encode, Timestamp};
use crate::error::{Error, Result};
use crate::group::{Curve, GroupPoint, NistP256, Scalar};
use crate::hash::{h2, xor};
use crate::kmc::{partial_key_hash, CertificateIssuer, RsuCertificate};
use crate::params::SystemParams;
use crate::schnorr;
use crate::vehicle::{
    beacon_secret_hash, collision_hash, trapdoor_hash, BroadcastPacket, SigncryptedMessage,
    DEFAULT_FRESHNESS_WINDOW,
};

/// γ (the RSU secret), Y_R = γP, and the KMC certificate.
#[derive(Clone)]
pub struct RsuKeys<C: Curve = NistP256> {
    secret: Scalar<C>,
    pub public: GroupPoint<C>,
    pub cert: RsuCertificate<C>,
    /// Maximum |now − tt| in seconds for a message to enter aggregation.
    pub freshness_window: u64,
}

impl<C: Curve> std::fmt::Debug for RsuKeys<C> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RsuKeys")
            .field("public", &self.public)
            .field("cert", &self.cert)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject,
}

/// Why a message did not make it into an accepted aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rejection {
    /// tt outside the pseudo-ID validity period.
    PseudonymExpired,
    /// |now − tt| beyond the freshness window.
    Stale,
    /// Same (pid, tt) earlier in the same batch.
    DuplicateInBatch,
    /// Same (pid, tt) already seen by this RSU.
    Replay,
    /// X, Y or L is the identity.
    DegeneratePoint,
    /// Could not be parsed from the wire.
    Malformed,
    /// Singled out by bisection after a failed aggregate.
    BadSigner,
}

impl Rejection {
    pub fn label(self) -> &'static str {
        match self {
            Rejection::PseudonymExpired => "pseudonym_expired",
            Rejection::Stale => "stale",
            Rejection::DuplicateInBatch => "duplicate_in_batch",
            Rejection::Replay => "replay",
            Rejection::DegeneratePoint => "degenerate_point",
            Rejection::Malformed => "malformed",
            Rejection::BadSigner => "bad_signer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchResult {
    pub verdict: Verdict,
    /// Indices (into the submitted batch) that entered aggregation.
    pub admitted: Vec<usize>,
    /// Indices dropped by the per-message pre-checks.
    pub excluded: Vec<(usize, Rejection)>,
    /// One plaintext per admitted message, in `admitted` order; present iff
    /// the verdict is accept.
    pub plaintexts: Option<Vec<Vec<u8>>>,
    /// Operations spent deciding the verdict.
    pub verify_ops: OpCounter,
    /// Operations spent decrypting after acceptance.
    pub decrypt_ops: OpCounter,
}

impl BatchResult {
    pub fn counters(&self) -> OpCounter {
        self.verify_ops + self.decrypt_ops
    }
}

/// Key identifying a message for replay purposes: its (pid, tt) pair.
pub fn replay_key<C: Curve>(msg: &SigncryptedMessage<C>) -> Vec<u8> {
    let mut key = msg.pid.to_wire();
    Encode::<C>::encode_into(&msg.timestamp, &mut key);
    key
}

impl<C: Curve> RsuKeys<C> {
    /// Chooses γ, obtains a certificate for (ID_R, γP), and checks it locally.
    pub fn register<K: CertificateIssuer<C>>(
        params: &SystemParams<C>,
        id: &[u8],
        kmc: &K,
        rng: &mut (impl RngCore + CryptoRng),
    ) -> Result<Self> {
        let secret = Scalar::random_nonzero(rng);
        let public = GroupPoint::mul_base(&secret);
        let cert = kmc.issue_rsu_cert(id, &public, rng)?;
        if cert.id != id || cert.public_key != public || !cert.verify(&params.master_public) {
            return Err(Error::CertificateInvalid);
        }
        Ok(RsuKeys { secret, public, cert, freshness_window: DEFAULT_FRESHNESS_WINDOW })
    }

    pub fn with_freshness_window(mut self, seconds: u64) -> Self {
        self.freshness_window = seconds;
        self
    }

    pub fn id(&self) -> &[u8] {
        &self.cert.id
    }

    /// Whether Y_R = γP and the certificate verifies under P_pub.
    pub fn is_consistent(&self, params: &SystemParams<C>) -> bool {
        GroupPoint::mul_base(&self.secret) == self.public
            && self.cert.public_key == self.public
            && self.cert.verify(&params.master_public)
    }

    /// A fresh beacon ⟨cert_R, η, Sig(η, tt_R)⟩.
    pub fn make_broadcast(&self, tt: Timestamp, rng: &mut (impl RngCore + CryptoRng)) -> BroadcastPacket<C> {
        let eta = Scalar::random_nonzero(rng);
        let signature = schnorr::sign(&self.secret, &BroadcastPacket::signed_bytes(&eta, tt), rng);
        BroadcastPacket { cert: self.cert.clone(), eta, timestamp: tt, signature }
    }

    fn precheck(&self, batch: &[SigncryptedMessage<C>], now: Timestamp) -> (Vec<usize>, Vec<(usize, Rejection)>) {
        let mut admitted = Vec::with_capacity(batch.len());
        let mut excluded = Vec::new();
        let mut seen = HashSet::new();
        for (i, msg) in batch.iter().enumerate() {
            let reason = if msg.ephemeral.is_identity()
                || msg.partial_public.is_identity()
                || msg.secret_public.is_identity()
            {
                Some(Rejection::DegeneratePoint)
            } else if !msg.pid.is_valid_at(msg.timestamp) {
                Some(Rejection::PseudonymExpired)
            } else if now.abs_diff(msg.timestamp) > self.freshness_window {
                Some(Rejection::Stale)
            } else if !seen.insert(replay_key(msg)) {
                Some(Rejection::DuplicateInBatch)
            } else {
                None
            };
            match reason {
                Some(r) => excluded.push((i, r)),
                None => admitted.push(i),
            }
        }
        (admitted, excluded)
    }

    /// The V1 = V2 check over `msgs`, with no pre-checks and no decryption.
    ///
    /// Costs exactly five scalar multiplications and 3n + 1 H1 invocations.
    pub fn aggregate_holds<'a>(
        &self,
        params: &SystemParams<C>,
        eta: &Scalar<C>,
        msgs: impl IntoIterator<Item = &'a SigncryptedMessage<C>>,
    ) -> bool {
        let mut hash_gap = Scalar::<C>::zero(); // Σ(h3 − h4)
        let mut q_sum = Scalar::<C>::zero();
        let mut t_sum = Scalar::<C>::zero();
        let mut x_sum = GroupPoint::<C>::identity();
        let mut y_sum = GroupPoint::<C>::identity();
        let mut l_sum = GroupPoint::<C>::identity();
        let mut n = 0usize;
        for m in msgs {
            q_sum = q_sum + partial_key_hash(&m.pid, &m.partial_public);
            let h3 = trapdoor_hash(&m.pid, &m.partial_public, &m.secret_public, m.timestamp);
            let h4 = collision_hash(&m.ciphertext, &m.ephemeral, &self.cert, m.timestamp);
            hash_gap = hash_gap + (h3 - h4);
            t_sum = t_sum + m.t;
            x_sum = x_sum + m.ephemeral;
            y_sum = y_sum + m.partial_public;
            l_sum = l_sum + m.secret_public;
            n += 1;
        }
        if n == 0 {
            return false;
        }

        let beacon_point = GroupPoint::mul_base(&(self.secret * *eta));
        let unblind = beacon_secret_hash(&beacon_point).invert().expect("h1 output is nonzero");
        let eta_term = GroupPoint::mul_base(&(*eta * hash_gap));
        let master_term = params.master_public.mul(&q_sum);
        let t_term = GroupPoint::mul_base(&t_sum);
        let ephemeral_hash_key = (x_sum - t_term).mul(&unblind) - l_sum;

        // V1 − V2 = η(Σh3 − Σh4)P + Σ(Y + L) − Z + (ΣQ)P_pub
        (eta_term + y_sum + l_sum - ephemeral_hash_key + master_term).is_identity()
    }

    /// Pre-checks each message, aggregates the survivors, and decrypts them
    /// only if the aggregate verifies.
    pub fn batch_verify(
        &self,
        params: &SystemParams<C>,
        eta: &Scalar<C>,
        batch: &[SigncryptedMessage<C>],
        now: Timestamp,
    ) -> Result<BatchResult> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let (admitted, excluded) = self.precheck(batch, now);
        let (holds, verify_ops) =
            measure(|| !admitted.is_empty() && self.aggregate_holds(params, eta, admitted.iter().map(|&i| &batch[i])));
        if !holds {
            return Ok(BatchResult {
                verdict: Verdict::Reject,
                admitted,
                excluded,
                plaintexts: None,
                verify_ops,
                decrypt_ops: OpCounter::default(),
            });
        }
        let (plaintexts, decrypt_ops) = measure(|| {
            admitted.iter().map(|&i| self.decrypt_one(params, &batch[i])).collect::<Result<Vec<_>>>()
        });
        Ok(BatchResult {
            verdict: Verdict::Accept,
            admitted,
            excluded,
            plaintexts: Some(plaintexts?),
            verify_ops,
            decrypt_ops,
        })
    }

    /// m = c ⊕ H2(γX). One scalar multiplication and one H2.
    pub fn decrypt_one(&self, params: &SystemParams<C>, msg: &SigncryptedMessage<C>) -> Result<Vec<u8>> {
        if msg.ciphertext.len() != params.message_len() {
            return Err(Error::MessageLength { expected: params.message_len(), actual: msg.ciphertext.len() });
        }
        let shared = msg.ephemeral.mul(&self.secret);
        if shared.is_identity() {
            return Err(Error::IdentityPoint("γX"));
        }
        Ok(xor(&msg.ciphertext, &h2(&shared, params.message_bits)?))
    }

    /// Indices of the messages responsible for a failed aggregate, found by
    /// recursive bisection over the messages that pass the pre-checks.
    ///
    /// Returns an empty list when the admitted messages verify together.
    pub fn isolate_bad_signers(
        &self,
        params: &SystemParams<C>,
        eta: &Scalar<C>,
        batch: &[SigncryptedMessage<C>],
        now: Timestamp,
    ) -> Vec<usize> {
        let (admitted, _) = self.precheck(batch, now);
        let mut bad = Vec::new();
        self.bisect(params, eta, batch, &admitted, &mut bad);
        bad
    }

    fn bisect(
        &self,
        params: &SystemParams<C>,
        eta: &Scalar<C>,
        batch: &[SigncryptedMessage<C>],
        indices: &[usize],
        bad: &mut Vec<usize>,
    ) {
        if indices.is_empty() || self.aggregate_holds(params, eta, indices.iter().map(|&i| &batch[i])) {
            return;
        }
        if let [single] = indices {
            bad.push(*single);
            return;
        }
        let (left, right) = indices.split_at(indices.len() / 2);
        self.bisect(params, eta, batch, left, bad);
        self.bisect(params, eta, batch, right, bad);
    }
}

/// Bounded set of recently seen (pid, tt) keys. Safe to share between
/// threads.
#[derive(Debug)]
pub struct ReplayCache {
    capacity: usize,
    inner: Mutex<ReplayInner>,
}

#[derive(Debug, Default)]
struct ReplayInner {
    seen: HashSet<Vec<u8>>,
    order: VecDeque<Vec<u8>>,
}

impl ReplayCache {
    pub const DEFAULT_CAPACITY: usize = 1 << 16;

    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayCache { capacity, inner: Mutex::new(ReplayInner::default()) }
    }

    /// Records `key`; returns false if it was already present.
    pub fn insert(&self, key: Vec<u8>) -> bool {
        let mut inner = self.inner.lock().expect("replay cache poisoned");
        if inner.seen.contains(&key) {
            return false;
        }
        if inner.order.len() == self.capacity {
            if let Some(old) = inner.order.pop_front() {
                inner.seen.remove(&old);
            }
        }
        inner.seen.insert(key.clone());
        inner.order.push_back(key);
        true
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("replay cache poisoned").order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for ReplayCache {
    fn default() -> Self {
        Self::new(Self::DEFAULT_CAPACITY)
    }
}

/// Outcome for one message handled by [`RsuNode::process`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MessageStatus {
    Accepted(Vec<u8>),
    Rejected(Rejection),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessOutcome {
    pub statuses: Vec<MessageStatus>,
    /// Verdict of the first aggregate over the whole batch.
    pub first_verdict: Verdict,
    pub ops: OpCounter,
}

/// A running RSU: key material plus the replay cache.
///
/// `process` drops replays, batch-verifies the rest, and on failure isolates
/// the bad signers and decrypts everything else.
#[derive(Debug)]
pub struct RsuNode<C: Curve = NistP256> {
    pub keys: RsuKeys<C>,
    replay: ReplayCache,
}

impl<C: Curve> RsuNode<C> {
    pub fn new(keys: RsuKeys<C>) -> Self {
        Self::with_replay_capacity(keys, ReplayCache::DEFAULT_CAPACITY)
    }

    pub fn with_replay_capacity(keys: RsuKeys<C>, capacity: usize) -> Self {
        RsuNode { keys, replay: ReplayCache::new(capacity) }
    }

    pub fn replay_cache(&self) -> &ReplayCache {
        &self.replay
    }

    pub fn process(
        &self,
        params: &SystemParams<C>,
        eta: &Scalar<C>,
        batch: &[SigncryptedMessage<C>],
        now: Timestamp,
    ) -> Result<ProcessOutcome> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut statuses: Vec<Option<MessageStatus>> = vec![None; batch.len()];
        let mut fresh = Vec::with_capacity(batch.len());
        for (i, msg) in batch.iter().enumerate() {
            if self.replay.insert(replay_key(msg)) {
                fresh.push(i);
            } else {
                statuses[i] = Some(MessageStatus::Rejected(Rejection::Replay));
            }
        }
        let candidates: Vec<SigncryptedMessage<C>> = fresh.iter().map(|&i| batch[i].clone()).collect();

        let (outcome, ops) = measure(|| -> Result<_> {
            if candidates.is_empty() {
                return Ok((Verdict::Reject, Vec::new()));
            }
            let result = self.keys.batch_verify(params, eta, &candidates, now)?;
            let mut rest = Vec::new();
            for &(j, reason) in &result.excluded {
                rest.push((j, MessageStatus::Rejected(reason)));
            }
            match result.plaintexts {
                Some(plaintexts) => {
                    for (&j, m) in result.admitted.iter().zip(plaintexts) {
                        rest.push((j, MessageStatus::Accepted(m)));
                    }
                }
                None => {
                    let bad: HashSet<usize> =
                        self.keys.isolate_bad_signers(params, eta, &candidates, now).into_iter().collect();
                    for &j in &result.admitted {
                        let status = if bad.contains(&j) {
                            MessageStatus::Rejected(Rejection::BadSigner)
                        } else {
                            MessageStatus::Accepted(self.keys.decrypt_one(params, &candidates[j])?)
                        };
                        rest.push((j, status));
                    }
                }
            }
            Ok((result.verdict, rest))
        });
        let (first_verdict, rest) = outcome?;

        for (j, status) in rest {
            statuses[fresh[j]] = Some(status);
        }
        Ok(ProcessOutcome {
            statuses: statuses.into_iter().map(|s| s.expect("every message classified")).collect(),
            first_verdict,
            ops,
        })
    }
}
