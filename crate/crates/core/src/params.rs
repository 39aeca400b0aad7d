use std::marker::PhantomData;

use crate::error::{Error, Result};
use crate::group::{Curve, CurveId, GroupPoint, NistP256};

/// Public system parameters shared by every party.
///
/// The group order and the hash functions are fixed by the curve type `C`;
/// the remaining fields are what the authorities publish.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemParams<C: Curve = NistP256> {
    /// KMC master public key, sP.
    pub master_public: GroupPoint<C>,
    /// TRA public key, βP.
    pub trace_public: GroupPoint<C>,
    /// Bit length l_m of every traffic message.
    pub message_bits: usize,
    /// Byte length of a real identity.
    pub id_len: usize,
    _curve: PhantomData<C>,
}

impl<C: Curve> SystemParams<C> {
    pub const DEFAULT_MESSAGE_BITS: usize = 256;
    pub const DEFAULT_ID_LEN: usize = 16;

    pub fn new(
        master_public: GroupPoint<C>,
        trace_public: GroupPoint<C>,
        message_bits: usize,
        id_len: usize,
    ) -> Result<Self> {
        if master_public.is_identity() || trace_public.is_identity() {
            return Err(Error::InvalidParams("authority public keys must not be the identity".into()));
        }
        if message_bits < 8 || !message_bits.is_multiple_of(8) {
            return Err(Error::InvalidParams(format!(
                "message length {message_bits} bits must be a positive multiple of 8"
            )));
        }
        if id_len == 0 || id_len * 8 >= C::order().bits() as usize {
            return Err(Error::InvalidParams(format!(
                "identity length {id_len} bytes does not fit below the group order"
            )));
        }
        Ok(SystemParams { master_public, trace_public, message_bits, id_len, _curve: PhantomData })
    }

    pub fn curve_id(&self) -> CurveId {
        C::ID
    }

    pub fn generator(&self) -> GroupPoint<C> {
        GroupPoint::generator()
    }

    pub fn message_len(&self) -> usize {
        self.message_bits / 8
    }
}
