//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs without the libtest harness so the lines print in order.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use v2i_signcrypt::counter::OpCounter;
use v2i_signcrypt::prelude::*;
use v2i_signcrypt::sim::{run_scenario, Adversary, Scenario};

type C = NistP256;

const NOW: u64 = 1_700_000_000;

struct World {
    rng: ChaCha20Rng,
    kmc: MasterKey<C>,
    tra: TraceKey<C>,
    params: SystemParams<C>,
    rsu: RsuKeys<C>,
}

impl World {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let kmc = MasterKey::generate(&mut rng);
        let tra = TraceKey::generate(&mut rng);
        let params = SystemParams::new(kmc.public(), tra.public(), 256, 16).expect("params");
        let rsu = RsuKeys::register(&params, b"RSU-ACC", &kmc, &mut rng).expect("rsu");
        World { rng, kmc, tra, params, rsu }
    }

    fn validity(&self) -> ValidityPeriod {
        ValidityPeriod::new(NOW - 3_600, NOW + 3_600)
    }

    fn vehicles(&mut self, n: usize) -> Vec<Vehicle<C>> {
        let validity = self.validity();
        (0..n)
            .map(|i| {
                let rid = RealIdentity::from_label(&format!("CAR-{i:05}"), 16);
                Vehicle::enroll(&self.params, rid, &self.tra, &self.kmc, validity, &mut self.rng).expect("enroll")
            })
            .collect()
    }

    fn report(&mut self) -> Vec<u8> {
        let mut m = vec![0u8; self.params.message_len()];
        self.rng.fill_bytes(&mut m);
        m
    }

    /// A fresh beacon and one honest message per vehicle, with plaintexts.
    fn batch(&mut self, fleet: &[Vehicle<C>]) -> (BroadcastPacket<C>, Vec<SigncryptedMessage<C>>, Vec<Vec<u8>>) {
        let beacon = self.rsu.make_broadcast(Timestamp(NOW), &mut self.rng);
        let mut msgs = Vec::with_capacity(fleet.len());
        let mut plain = Vec::with_capacity(fleet.len());
        for v in fleet {
            let m = self.report();
            msgs.push(v.signcrypt(&self.params, &beacon, &m, Timestamp(NOW), &mut self.rng).expect("signcrypt"));
            plain.push(m);
        }
        (beacon, msgs, plain)
    }
}

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, started: Instant) -> std::result::Result<(), String> {
    let took = started.elapsed();
    if took <= limit {
        Ok(())
    } else {
        Err(format!("took {took:.2?}, limit {limit:?}"))
    }
}

fn round_trip() -> Outcome {
    let started = Instant::now();
    let mut w = World::new(1);
    let mut summary = Vec::new();
    for n in [1usize, 2, 10, 100] {
        let fleet = w.vehicles(n);
        let (beacon, msgs, plain) = w.batch(&fleet);
        let res = w.rsu.batch_verify(&w.params, &beacon.eta, &msgs, Timestamp(NOW)).map_err(|e| e.to_string())?;
        if res.verdict != Verdict::Accept {
            return Err(format!("n={n}: honest batch rejected"));
        }
        let got = res.plaintexts.unwrap_or_default();
        let ordered: Vec<&Vec<u8>> = res.admitted.iter().map(|&i| &plain[i]).collect();
        if res.admitted.len() != n || got.iter().collect::<Vec<_>>() != ordered {
            return Err(format!("n={n}: plaintexts differ"));
        }
        summary.push(format!("n={n} ok"));
    }
    within(Duration::from_secs(10), started)?;
    Ok(format!("{} in {:.2?}", summary.join(", "), started.elapsed()))
}

fn counts() -> Outcome {
    let mut w = World::new(2);
    let fleet = w.vehicles(100);
    let beacon = w.rsu.make_broadcast(Timestamp(NOW), &mut w.rng);
    let m = w.report();
    let (_, sc) = measure(|| fleet[0].signcrypt(&w.params, &beacon, &m, Timestamp(NOW), &mut w.rng));
    if sc.scalar_mults != 3 {
        return Err(format!("signcrypt used {} mults", sc.scalar_mults));
    }
    let mut lines = vec![format!("signcrypt {}M", sc.scalar_mults)];
    for n in [1usize, 10, 100] {
        let (beacon, msgs, _) = w.batch(&fleet[..n]);
        let res = w.rsu.batch_verify(&w.params, &beacon.eta, &msgs, Timestamp(NOW)).map_err(|e| e.to_string())?;
        let (v, d): (OpCounter, OpCounter) = (res.verify_ops, res.decrypt_ops);
        let expect_h1 = 3 * n as u64 + 1;
        let ok = v.scalar_mults == 5
            && v.hashes_h1 == expect_h1
            && v.hashes_h2 == 0
            && d.scalar_mults == n as u64
            && d.hashes_h2 == n as u64
            && d.hashes_h1 == 0;
        let line = format!(
            "n={n}: verify {}M+{}H1, decrypt {}M+{}H2",
            v.scalar_mults, v.hashes_h1, d.scalar_mults, d.hashes_h2
        );
        if !ok {
            return Err(line);
        }
        lines.push(line);
    }
    Ok(lines.join("; "))
}

/// Whether the RSU refuses the message at `idx` after its wire bytes were
/// replaced by `wire`. Returns how it was refused, or None if accepted.
fn refused(w: &World, eta: &Scalar<C>, msgs: &[SigncryptedMessage<C>], idx: usize, wire: &[u8]) -> Option<&'static str> {
    let tampered = match SigncryptedMessage::<C>::from_wire(wire, w.params.message_len()) {
        Ok(m) => m,
        Err(_) => return Some("malformed"),
    };
    let mut batch = msgs.to_vec();
    batch[idx] = tampered;
    let res = w.rsu.batch_verify(&w.params, eta, &batch, Timestamp(NOW)).expect("nonempty batch");
    if let Some(&(_, r)) = res.excluded.iter().find(|(i, _)| *i == idx) {
        return Some(r.label());
    }
    match res.verdict {
        Verdict::Reject => Some("aggregate"),
        Verdict::Accept => None,
    }
}

fn tamper() -> Outcome {
    let started = Instant::now();
    let mut w = World::new(3);
    let fleet = w.vehicles(5);
    let (beacon, msgs, _) = w.batch(&fleet);
    let target = 2;
    let wire = msgs[target].to_wire();
    let layout = SigncryptedMessage::<C>::wire_layout(w.params.message_len());

    let mut per_field = Vec::new();
    for (field, range) in &layout {
        // skip the type tag so the flip lands in the value itself
        let payload = match field {
            WireField::Ciphertext | WireField::PidMask => range.clone(),
            _ => range.start + 1..range.end,
        };
        let (byte, bit) = match field {
            // low bit of tt keeps it inside the freshness and validity windows
            WireField::Timestamp => (payload.end - 1, 0),
            _ => (payload.start + (w.rng.next_u32() as usize % payload.len()), w.rng.next_u32() % 8),
        };
        let mut bad = wire.clone();
        bad[byte] ^= 1 << bit;
        match refused(&w, &beacon.eta, &msgs, target, &bad) {
            Some(how) => per_field.push(format!("{field:?}:{how}")),
            None => return Err(format!("flip in {field:?} accepted")),
        }
    }

    let mut false_accepts = 0;
    for _ in 0..1_000 {
        let idx = w.rng.next_u32() as usize % msgs.len();
        let mut bad = msgs[idx].to_wire();
        let bit = w.rng.next_u32() as usize % (bad.len() * 8);
        bad[bit / 8] ^= 1 << (bit % 8);
        if refused(&w, &beacon.eta, &msgs, idx, &bad).is_none() {
            false_accepts += 1;
        }
    }
    within(Duration::from_secs(60), started)?;
    check(
        false_accepts == 0,
        format!("{}; fuzz false accepts {false_accepts}/1000; {:.2?}", per_field.join(" "), started.elapsed()),
    )
}

fn traceability() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let kmc = MasterKey::<C>::generate(&mut rng);
    let tra = TraceKey::<C>::generate(&mut rng);
    let params = SystemParams::new(kmc.public(), tra.public(), 256, 16).expect("params");
    let random_triple = |rng: &mut ChaCha20Rng| {
        let mut rid = vec![0u8; 16];
        rng.fill_bytes(&mut rid);
        let lambda = Scalar::<C>::random_nonzero(rng);
        let start = rng.next_u64() >> 2;
        let validity = ValidityPeriod::new(start, start + (rng.next_u64() >> 40));
        (RealIdentity::new(rid), GroupPoint::mul_base(&lambda), validity)
    };

    for i in 0..1_000 {
        let (rid, anchor, validity) = random_triple(&mut rng);
        let pid = tra.issue_pid(&params, &rid, &anchor, validity).map_err(|e| e.to_string())?;
        if tra.trace(&params, &pid).ok().as_ref() != Some(&rid) {
            return Err(format!("trace failed on triple {i}"));
        }
    }
    let mut recovered = 0;
    let mut refused = 0;
    for _ in 0..10_000 {
        let (rid, anchor, validity) = random_triple(&mut rng);
        let pid = tra.issue_pid(&params, &rid, &anchor, validity).map_err(|e| e.to_string())?;
        match TraceKey::<C>::generate(&mut rng).trace(&params, &pid) {
            Ok(got) if got == rid => recovered += 1,
            Ok(_) => {}
            Err(_) => refused += 1,
        }
    }
    check(
        recovered == 0,
        format!("1000/1000 traced; wrong key recovered {recovered}/10000 ({refused} refused by padding check)"),
    )
}

fn unlinkability() -> Outcome {
    let mut w = World::new(5);
    let rid = RealIdentity::from_label("CAR-UNLINK", 16);
    let mut car = Vehicle::enroll(&w.params, rid, &w.tra, &w.kmc, w.validity(), &mut w.rng).map_err(|e| e.to_string())?;
    let report = w.report();
    let mut pairs = HashSet::new();
    let mut msgs = Vec::new();
    for epoch in 0..100u64 {
        // one pseudonym per hour, one report under each
        let start = NOW + epoch * 3_600;
        let validity = ValidityPeriod::new(start, start + 3_599);
        car.refresh_pseudonym(&w.params, &w.tra, &w.kmc, validity, &mut w.rng).map_err(|e| e.to_string())?;
        pairs.insert((car.pid().anchor, car.pid().masked_id.clone()));
        let tt = Timestamp(start + 60);
        let beacon = w.rsu.make_broadcast(tt, &mut w.rng);
        msgs.push(car.signcrypt(&w.params, &beacon, &report, tt, &mut w.rng).map_err(|e| e.to_string())?);
    }
    if pairs.len() != 100 {
        return Err(format!("{} distinct pseudonyms out of 100", pairs.len()));
    }

    let layout = SigncryptedMessage::<C>::wire_layout(w.params.message_len());
    let wires: Vec<Vec<u8>> = msgs.iter().map(|m| m.to_wire()).collect();
    for (field, range) in &layout {
        let distinct: HashSet<&[u8]> = wires.iter().map(|b| &b[range.clone()]).collect();
        if distinct.len() != wires.len() {
            return Err(format!("field {field:?} repeats across pseudonyms"));
        }
    }
    Ok(format!("100 distinct (PID1, PID2); all {} wire fields pairwise distinct", layout.len()))
}

fn batch_advantage() -> Outcome {
    let mut w = World::new(6);
    let fleet = w.vehicles(100);
    let (beacon, msgs, _) = w.batch(&fleet);
    let now = Timestamp(NOW);
    let time = |f: &dyn Fn()| {
        f(); // warmup
        let mut runs: Vec<Duration> = (0..5)
            .map(|_| {
                let s = Instant::now();
                f();
                s.elapsed()
            })
            .collect();
        runs.sort();
        runs[runs.len() / 2]
    };
    let batched = time(&|| {
        let r = w.rsu.batch_verify(&w.params, &beacon.eta, &msgs, now).expect("batch");
        assert_eq!(r.verdict, Verdict::Accept);
    });
    let sequential = time(&|| {
        for m in &msgs {
            let r = w.rsu.batch_verify(&w.params, &beacon.eta, std::slice::from_ref(m), now).expect("single");
            assert_eq!(r.verdict, Verdict::Accept);
        }
    });
    let ratio = sequential.as_secs_f64() / batched.as_secs_f64();
    check(ratio >= 2.0, format!("batch {batched:.2?} vs sequential {sequential:.2?}: {ratio:.2}x"))
}

fn verify_before_decrypt() -> Outcome {
    let mut w = World::new(7);
    let fleet = w.vehicles(10);
    let (beacon, mut msgs, _) = w.batch(&fleet);
    msgs[4].ciphertext[0] ^= 0x01;
    let (res, total) = measure(|| w.rsu.batch_verify(&w.params, &beacon.eta, &msgs, Timestamp(NOW)));
    let res = res.map_err(|e| e.to_string())?;
    let ok = res.verdict == Verdict::Reject
        && res.plaintexts.is_none()
        && res.decrypt_ops == OpCounter::default()
        && total.hashes_h2 == 0
        && total.scalar_mults == 5;
    check(ok, format!("rejected batch: {} mults total, {} H2", total.scalar_mults, total.hashes_h2))
}

fn simulator() -> Outcome {
    let sc = Scenario { n_vehicles: 20, adversary: Adversary::Tamper(0.2), seed: 8, ..Scenario::default() };
    let a = run_scenario::<C>(&sc).map_err(|e| e.to_string())?;
    let b = run_scenario::<C>(&sc).map_err(|e| e.to_string())?;
    let exact = !a.tampered.is_empty() && a.isolated == a.tampered;
    let detail = format!(
        "injected {}, isolated {}, accepted {}/{}; repeat identical: {}",
        a.tampered.len(),
        a.isolated.len(),
        a.messages_accepted,
        a.messages_sent,
        a.same_outcome(&b)
    );
    check(
        exact && a.same_outcome(&b) && a.plaintext_mismatches == 0 && a.to_record() != String::new(),
        detail,
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("round trip", round_trip),
        ("operation counts", counts),
        ("tamper soundness", tamper),
        ("traceability", traceability),
        ("unlinkability", unlinkability),
        ("batch advantage", batch_advantage),
        ("verify before decrypt", verify_before_decrypt),
        ("simulator isolation and determinism", simulator),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
