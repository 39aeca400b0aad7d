//! Certificateless aggregate signcryption for vehicle-to-infrastructure
//! traffic reports.
//!
//! Parties:
//!
//! * the key management center ([`kmc`]) issues partial keys to vehicles and
//!   certificates to roadside units;
//! * the trace authority ([`tra`]) issues pseudonyms and can map one back to
//!   a real identity;
//! * vehicles ([`vehicle`]) signcrypt reports against an RSU beacon;
//! * roadside units ([`rsu`]) verify a whole batch with a constant number of
//!   scalar multiplications, then decrypt.
//!
//! Everything is generic over the curve backend ([`group::Curve`]); P-256 is
//! the default and secp256k1 is also provided. [`counter::measure`] reports
//! the scalar multiplications and hash calls made by any closure.
//!
//! ```
//! use rand_chacha::ChaCha20Rng;
//! use rand_core::SeedableRng;
//! use v2i_signcrypt::prelude::*;
//!
//! let mut rng = ChaCha20Rng::seed_from_u64(1);
//! let kmc = MasterKey::<NistP256>::generate(&mut rng);
//! let tra = TraceKey::generate(&mut rng);
//! let params = SystemParams::new(kmc.public(), tra.public(), 256, 16).unwrap();
//! let rsu = RsuKeys::register(&params, b"RSU-1", &kmc, &mut rng).unwrap();
//!
//! let now = Timestamp(1_000);
//! let beacon = rsu.make_broadcast(now, &mut rng);
//! assert!(validate_broadcast(&beacon, &params.master_public, now, 300));
//!
//! let rid = RealIdentity::from_label("CAR-42", 16);
//! let car = Vehicle::enroll(&params, rid.clone(), &tra, &kmc, ValidityPeriod::new(0, 10_000), &mut rng).unwrap();
//! let msg = car.signcrypt(&params, &beacon, &[7u8; 32], now, &mut rng).unwrap();
//!
//! let result = rsu.batch_verify(&params, &beacon.eta, &[msg.clone()], now).unwrap();
//! assert_eq!(result.verdict, Verdict::Accept);
//! assert_eq!(result.plaintexts.unwrap()[0], vec![7u8; 32]);
//! assert_eq!(tra.trace(&params, &msg.pid).unwrap(), rid);
//! ```

pub mod counter;
pub mod encoding;
pub mod error;
pub mod group;
pub mod hash;
pub mod kmc;
pub mod params;
pub mod schnorr;
pub mod tra;
pub mod vehicle;
pub mod rsu;
pub mod sim;

pub use error::{Error, Result};

/// The types needed to run the protocol end to end.
pub mod prelude {
    pub use crate::counter::{measure, OpCounter};
    pub use crate::encoding::{Timestamp, ValidityPeriod};
    pub use crate::error::Error;
    pub use crate::group::{Curve, CurveId, GroupPoint, NistP256, Scalar, Secp256k1};
    pub use crate::kmc::{CertificateIssuer, MasterKey, PartialKeyIssuer, RsuCertificate};
    pub use crate::params::SystemParams;
    pub use crate::rsu::{BatchResult, MessageStatus, Rejection, RsuKeys, RsuNode, Verdict};
    pub use crate::tra::{PseudoId, RealIdentity, TraceKey};
    pub use crate::vehicle::{validate_broadcast, BroadcastPacket, SigncryptedMessage, Vehicle, WireField};
}
