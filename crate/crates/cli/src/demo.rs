//! One end-to-end run printed step by step. Output depends only on the seed
//! and the curve.

use std::fmt::Write;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use v2i_signcrypt::counter::measure;
use v2i_signcrypt::prelude::*;

use crate::Failure;

const NOW: u64 = 1_700_000_000;

pub fn transcript(seed: u64, curve: CurveId) -> Result<String, Failure> {
    match curve {
        CurveId::P256 => run::<NistP256>(seed),
        CurveId::Secp256k1 => run::<Secp256k1>(seed),
    }
}

fn run<C: Curve>(seed: u64) -> Result<String, Failure> {
    let mut out = String::new();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut line = |k: &str, v: String| writeln!(out, "{k:<22} {v}").expect("write to String");

    line("curve", C::ID.to_string());
    line("seed", seed.to_string());

    let kmc = MasterKey::<C>::generate(&mut rng);
    let tra = TraceKey::<C>::generate(&mut rng);
    let params = SystemParams::new(
        kmc.public(),
        tra.public(),
        SystemParams::<C>::DEFAULT_MESSAGE_BITS,
        SystemParams::<C>::DEFAULT_ID_LEN,
    )?;
    line("setup.P_pub", hex::encode(params.master_public.to_bytes()));
    line("setup.T_pub", hex::encode(params.trace_public.to_bytes()));

    let rsu = RsuKeys::register(&params, b"RSU-DEMO", &kmc, &mut rng)?;
    line("rsu.id", String::from_utf8_lossy(rsu.id()).into_owned());
    line("rsu.Y_R", hex::encode(rsu.public.to_bytes()));
    line("rsu.cert", hex::encode(rsu.cert.to_wire()));

    let beacon = rsu.make_broadcast(Timestamp(NOW), &mut rng);
    line("beacon.eta", hex::encode(beacon.eta.to_bytes()));
    line("beacon.tt", beacon.timestamp.0.to_string());
    let beacon_ok = validate_broadcast(&beacon, &params.master_public, Timestamp(NOW), 300);
    line("beacon.valid", beacon_ok.to_string());

    let rid = RealIdentity::from_label("DEMO-CAR-7", params.id_len);
    let validity = ValidityPeriod::new(NOW - 3_600, NOW + 3_600);
    let car = Vehicle::enroll(&params, rid.clone(), &tra, &kmc, validity, &mut rng)?;
    line("vehicle.rid", String::from_utf8_lossy(rid.as_bytes()).into_owned());
    line("vehicle.PID1", hex::encode(car.pid().anchor.to_bytes()));
    line("vehicle.PID2", hex::encode(&car.pid().masked_id));
    line("vehicle.T", format!("{}..{}", validity.start.0, validity.end.0));
    line("vehicle.Y", hex::encode(car.keys().partial_public.to_bytes()));
    line("vehicle.L", hex::encode(car.keys().secret_public.to_bytes()));

    let mut report = vec![0u8; params.message_len()];
    rng.fill_bytes(&mut report);
    line("message", hex::encode(&report));

    let (msg, sc_ops) = measure(|| car.signcrypt(&params, &beacon, &report, Timestamp(NOW), &mut rng));
    let msg = msg?;
    line("sigma.t", hex::encode(msg.t.to_bytes()));
    line("sigma.c", hex::encode(&msg.ciphertext));
    line("sigma.X", hex::encode(msg.ephemeral.to_bytes()));
    line("sigma.tt", msg.timestamp.0.to_string());
    line("sigma.wire_bytes", msg.to_wire().len().to_string());
    line(
        "signcrypt.ops",
        format!("{} mults, {} H1, {} H2", sc_ops.scalar_mults, sc_ops.hashes_h1, sc_ops.hashes_h2),
    );

    let res = rsu.batch_verify(&params, &beacon.eta, std::slice::from_ref(&msg), Timestamp(NOW))?;
    line("verify.verdict", format!("{:?}", res.verdict));
    line("verify.ops", format!("{} mults, {} H1", res.verify_ops.scalar_mults, res.verify_ops.hashes_h1));
    let plain = res.plaintexts.and_then(|p| p.into_iter().next());
    line("decrypt.ops", format!("{} mults, {} H2", res.decrypt_ops.scalar_mults, res.decrypt_ops.hashes_h2));
    line("decrypt.plaintext", plain.as_deref().map(hex::encode).unwrap_or_else(|| "-".into()));
    line("decrypt.matches", (plain.as_deref() == Some(&report[..])).to_string());

    let traced = tra.trace(&params, &msg.pid)?;
    line("trace.rid", String::from_utf8_lossy(traced.as_bytes()).into_owned());
    line("trace.matches", (traced == rid).to_string());

    if !beacon_ok || res.verdict != Verdict::Accept || plain.as_deref() != Some(&report[..]) || traced != rid {
        return Err(Failure::Runtime(format!("demo run did not complete cleanly\n{out}")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_transcript() {
        let a = transcript(7, CurveId::P256).unwrap();
        assert_eq!(a, transcript(7, CurveId::P256).unwrap());
        assert_ne!(a, transcript(8, CurveId::P256).unwrap());
        assert!(a.contains("signcrypt.ops          3 mults"));
        assert!(a.contains("trace.matches          true"));
    }

    #[test]
    fn runs_on_secp256k1() {
        let t = transcript(7, CurveId::Secp256k1).unwrap();
        assert!(t.starts_with("curve                  secp256k1"));
    }
}
