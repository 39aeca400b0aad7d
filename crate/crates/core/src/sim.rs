//! In-process V2I channel simulation.
//!
//! Vehicle producers run on worker threads and push wire-encoded σ into one
//! channel; a single RSU consumer accumulates them into batch windows,
//! verifies, isolates bad signers, and decrypts.
//!
//! Batching runs on simulated time. Each producer emits its reports in
//! non-decreasing simulated time, so its latest timestamp is a watermark; a
//! window is closed once every live producer's watermark has passed its end.
//! Batch composition therefore never depends on thread interleaving, and a
//! fixed seed reproduces the report exactly (wall-clock timings aside).

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use crossbeam_channel::unbounded;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::counter::{measure, OpCounter};
use crate::encoding::{Timestamp, ValidityPeriod};
use crate::error::{Error, Result};
use crate::group::Curve;
use crate::kmc::MasterKey;
use crate::params::SystemParams;
use crate::rsu::{MessageStatus, Rejection, RsuKeys, RsuNode};
use crate::tra::{RealIdentity, TraceKey};
use crate::vehicle::{validate_broadcast, BroadcastPacket, SigncryptedMessage, Vehicle, WireField};

/// Simulated clock origin, in protocol seconds.
pub const SIM_EPOCH: u64 = 1_700_000_000;
/// Spacing between consecutive reports of one vehicle.
pub const REPORT_INTERVAL_MS: u64 = 1_000;
/// RSU beacon period.
pub const BEACON_PERIOD_MS: u64 = 60_000;

const VEHICLE_STREAM_SALT: u64 = 0x7665_6869_636c_6500;
const ADVERSARY_STREAM_SALT: u64 = 0x6164_7665_7273_6172;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Adversary {
    None,
    /// Flips one bit of the ciphertext or PID2 of each report with this
    /// probability.
    Tamper(f64),
    /// Re-sends an identical copy of each report with this probability.
    Replay(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n_vehicles: usize,
    pub reports_per_vehicle: usize,
    /// Batch window length in simulated milliseconds.
    pub batch_window_ms: u64,
    /// A window holding more messages is split into batches of this size.
    pub max_batch: usize,
    pub adversary: Adversary,
    pub seed: u64,
    /// Number of producer threads.
    pub producers: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            n_vehicles: 10,
            reports_per_vehicle: 1,
            batch_window_ms: 100,
            max_batch: 100,
            adversary: Adversary::None,
            seed: 0,
            producers: 4,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.n_vehicles == 0 || self.reports_per_vehicle == 0 {
            return bad("vehicle and report counts must be positive");
        }
        if self.batch_window_ms == 0 || self.max_batch == 0 || self.producers == 0 {
            return bad("batch window, batch size and producer count must be positive");
        }
        match self.adversary {
            Adversary::Tamper(r) | Adversary::Replay(r) if !(0.0..=1.0).contains(&r) => {
                bad("adversary rate must lie in [0, 1]")
            }
            _ => Ok(()),
        }
    }
}

/// Identifies one transmission: vehicle index, report sequence number, and
/// copy number (0 for the original, 1 for an injected replay).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MessageId {
    pub vehicle: u32,
    pub seq: u32,
    pub copy: u8,
}

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}.{}", self.vehicle, self.seq)?;
        if self.copy > 0 {
            write!(f, "r{}", self.copy)?;
        }
        Ok(())
    }
}

impl std::str::FromStr for MessageId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::Decode("message id");
        let rest = s.strip_prefix('v').ok_or_else(err)?;
        let (vehicle, rest) = rest.split_once('.').ok_or_else(err)?;
        let (seq, copy) = match rest.split_once('r') {
            Some((seq, copy)) => (seq, copy.parse().map_err(|_| err())?),
            None => (rest, 0),
        };
        Ok(MessageId { vehicle: vehicle.parse().map_err(|_| err())?, seq: seq.parse().map_err(|_| err())?, copy })
    }
}

/// Wall-clock timings; not reproducible.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub setup_ms: f64,
    pub signcrypt_ms: f64,
    pub verify_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub messages_sent: usize,
    pub messages_accepted: usize,
    pub messages_rejected: usize,
    pub replays_dropped: usize,
    pub malformed: usize,
    pub bad_signers_isolated: usize,
    pub batches_processed: usize,
    pub batches_failed_first_pass: usize,
    pub plaintext_mismatches: usize,
    /// RSU-side operation totals.
    pub rsu_ops: OpCounter,
    /// Messages the adversary tampered with.
    pub tampered: Vec<MessageId>,
    /// Messages rejected as bad signers.
    pub isolated: Vec<MessageId>,
    pub timings: PhaseTimings,
}

impl SimReport {
    /// Equality of everything except wall-clock timings.
    pub fn same_outcome(&self, other: &SimReport) -> bool {
        let mut a = self.clone();
        a.timings = other.timings;
        &a == other
    }

    /// Line-oriented `key=value` record. Keys under `wall_ms.` are timings.
    pub fn to_record(&self) -> String {
        let ids = |v: &[MessageId]| v.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        kv("messages_sent", self.messages_sent.to_string());
        kv("messages_accepted", self.messages_accepted.to_string());
        kv("messages_rejected", self.messages_rejected.to_string());
        kv("replays_dropped", self.replays_dropped.to_string());
        kv("malformed", self.malformed.to_string());
        kv("bad_signers_isolated", self.bad_signers_isolated.to_string());
        kv("batches_processed", self.batches_processed.to_string());
        kv("batches_failed_first_pass", self.batches_failed_first_pass.to_string());
        kv("plaintext_mismatches", self.plaintext_mismatches.to_string());
        kv("rsu_scalar_mults", self.rsu_ops.scalar_mults.to_string());
        kv("rsu_h1_calls", self.rsu_ops.hashes_h1.to_string());
        kv("rsu_h2_calls", self.rsu_ops.hashes_h2.to_string());
        kv("rsu_point_adds", self.rsu_ops.point_adds.to_string());
        kv("tampered", ids(&self.tampered));
        kv("isolated", ids(&self.isolated));
        kv("wall_ms.setup", format!("{:.3}", self.timings.setup_ms));
        kv("wall_ms.signcrypt", format!("{:.3}", self.timings.signcrypt_ms));
        kv("wall_ms.verify", format!("{:.3}", self.timings.verify_ms));
        kv("wall_ms.total", format!("{:.3}", self.timings.total_ms));
        out
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once('=').ok_or(Error::Decode("record line without `=`"))?;
            map.insert(k.trim(), v.trim());
        }
        let get = |k: &str| map.get(k).copied().ok_or(Error::Decode("record key missing"));
        let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| Error::Decode("record count")) };
        let num64 = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| Error::Decode("record count")) };
        let ms = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| Error::Decode("record timing")) };
        let ids = |k: &str| -> Result<Vec<MessageId>> {
            get(k)?.split(',').filter(|s| !s.is_empty()).map(str::parse).collect()
        };
        Ok(SimReport {
            messages_sent: num("messages_sent")?,
            messages_accepted: num("messages_accepted")?,
            messages_rejected: num("messages_rejected")?,
            replays_dropped: num("replays_dropped")?,
            malformed: num("malformed")?,
            bad_signers_isolated: num("bad_signers_isolated")?,
            batches_processed: num("batches_processed")?,
            batches_failed_first_pass: num("batches_failed_first_pass")?,
            plaintext_mismatches: num("plaintext_mismatches")?,
            rsu_ops: OpCounter {
                scalar_mults: num64("rsu_scalar_mults")?,
                hashes_h1: num64("rsu_h1_calls")?,
                hashes_h2: num64("rsu_h2_calls")?,
                point_adds: num64("rsu_point_adds")?,
            },
            tampered: ids("tampered")?,
            isolated: ids("isolated")?,
            timings: PhaseTimings {
                setup_ms: ms("wall_ms.setup")?,
                signcrypt_ms: ms("wall_ms.signcrypt")?,
                verify_ms: ms("wall_ms.verify")?,
                total_ms: ms("wall_ms.total")?,
            },
        })
    }
}

struct Envelope {
    id: MessageId,
    sim_ms: u64,
    wire: Vec<u8>,
    expected: Vec<u8>,
}

enum Event {
    Report { producer: usize, envelope: Envelope },
    Done { producer: usize },
    Failed { producer: usize, error: Error },
}

type OrderKey = (u64, u32, u32, u8);

fn order_key(e: &Envelope) -> OrderKey {
    (e.sim_ms, e.id.vehicle, e.id.seq, e.id.copy)
}

fn uniform(rng: &mut ChaCha20Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn stream_rng(seed: u64, salt: u64, vehicle: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ salt);
    rng.set_stream(vehicle as u64 + 1);
    rng
}

fn sim_time(sim_ms: u64) -> Timestamp {
    Timestamp(SIM_EPOCH + sim_ms / 1000)
}

struct ProducerVehicle<C: Curve> {
    index: usize,
    vehicle: Vehicle<C>,
    jitter_ms: u64,
    rng: ChaCha20Rng,
    adversary_rng: ChaCha20Rng,
}

/// Runs one vehicle's share of the traffic, in non-decreasing simulated time.
#[allow(clippy::too_many_arguments)]
fn produce<C: Curve>(
    producer: usize,
    mut fleet: Vec<ProducerVehicle<C>>,
    sc: &Scenario,
    params: &SystemParams<C>,
    beacons: &[BroadcastPacket<C>],
    tx: &crossbeam_channel::Sender<Event>,
) -> Result<()> {
    fleet.sort_by_key(|v| (v.jitter_ms, v.index));
    let layout = SigncryptedMessage::<C>::wire_layout(params.message_len());
    let field = |f: WireField| layout.iter().find(|(g, _)| *g == f).expect("field in layout").1.clone();
    let tamper_fields = [field(WireField::Ciphertext), field(WireField::PidMask)];

    for seq in 0..sc.reports_per_vehicle {
        for pv in fleet.iter_mut() {
            let sim_ms = seq as u64 * REPORT_INTERVAL_MS + pv.jitter_ms;
            let tt = sim_time(sim_ms);
            let beacon = &beacons[(sim_ms / BEACON_PERIOD_MS) as usize];
            if !validate_broadcast(beacon, &params.master_public, tt, crate::vehicle::DEFAULT_FRESHNESS_WINDOW) {
                return Err(Error::InvalidParams(format!("vehicle {} refused the RSU beacon", pv.index)));
            }
            let mut report = vec![0u8; params.message_len()];
            pv.rng.fill_bytes(&mut report);
            let sigma = pv.vehicle.signcrypt(params, beacon, &report, tt, &mut pv.rng)?;
            let mut wire = sigma.to_wire();
            let id = MessageId { vehicle: pv.index as u32, seq: seq as u32, copy: 0 };

            let mut duplicate = false;
            match sc.adversary {
                Adversary::Tamper(rate) if uniform(&mut pv.adversary_rng) < rate => {
                    let range = &tamper_fields[(pv.adversary_rng.next_u32() % 2) as usize];
                    let bit = pv.adversary_rng.next_u64() as usize % (range.len() * 8);
                    wire[range.start + bit / 8] ^= 1 << (bit % 8);
                }
                Adversary::Replay(rate) if uniform(&mut pv.adversary_rng) < rate => duplicate = true,
                _ => {}
            }
            let send = |id: MessageId, wire: Vec<u8>| {
                let envelope = Envelope { id, sim_ms, wire, expected: report.clone() };
                tx.send(Event::Report { producer, envelope }).expect("consumer outlives producers");
            };
            if duplicate {
                send(id, wire.clone());
                send(MessageId { copy: 1, ..id }, wire);
            } else {
                send(id, wire);
            }
        }
    }
    Ok(())
}

#[derive(Default)]
struct Tally {
    sent: usize,
    accepted: usize,
    rejected: usize,
    replays: usize,
    malformed: usize,
    batches: usize,
    failed_first_pass: usize,
    mismatches: usize,
    isolated: Vec<MessageId>,
    ops: OpCounter,
}

struct Consumer<'a, C: Curve> {
    sc: &'a Scenario,
    params: &'a SystemParams<C>,
    node: &'a RsuNode<C>,
    beacons: &'a [BroadcastPacket<C>],
    tally: Tally,
}

impl<C: Curve> Consumer<'_, C> {
    fn flush(&mut self, ready: Vec<Envelope>) -> Result<()> {
        let mut windows: BTreeMap<(u64, u64), Vec<Envelope>> = BTreeMap::new();
        for e in ready {
            let key = (e.sim_ms / self.sc.batch_window_ms, e.sim_ms / BEACON_PERIOD_MS);
            windows.entry(key).or_default().push(e);
        }
        for ((window, epoch), envelopes) in windows {
            let now = sim_time((window + 1) * self.sc.batch_window_ms);
            let eta = self.beacons[epoch as usize].eta;
            for chunk in envelopes.chunks(self.sc.max_batch) {
                self.process_batch(chunk, &eta, now)?;
            }
        }
        Ok(())
    }

    fn process_batch(&mut self, chunk: &[Envelope], eta: &crate::group::Scalar<C>, now: Timestamp) -> Result<()> {
        let mut decoded = Vec::with_capacity(chunk.len());
        let mut owners = Vec::with_capacity(chunk.len());
        for e in chunk {
            self.tally.sent += 1;
            match SigncryptedMessage::<C>::from_wire(&e.wire, self.params.message_len()) {
                Ok(sigma) => {
                    decoded.push(sigma);
                    owners.push(e);
                }
                Err(_) => {
                    self.tally.malformed += 1;
                    self.tally.rejected += 1;
                }
            }
        }
        if decoded.is_empty() {
            return Ok(());
        }
        let (outcome, ops) = measure(|| self.node.process(self.params, eta, &decoded, now));
        let outcome = outcome?;
        self.tally.ops += ops;
        self.tally.batches += 1;
        if outcome.first_verdict == crate::rsu::Verdict::Reject {
            self.tally.failed_first_pass += 1;
        }
        for (status, e) in outcome.statuses.into_iter().zip(owners) {
            match status {
                MessageStatus::Accepted(m) => {
                    self.tally.accepted += 1;
                    if m != e.expected {
                        self.tally.mismatches += 1;
                    }
                }
                MessageStatus::Rejected(reason) => {
                    self.tally.rejected += 1;
                    match reason {
                        Rejection::Replay => self.tally.replays += 1,
                        Rejection::BadSigner => self.tally.isolated.push(e.id),
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }
}

/// Sets up every party, runs the traffic, and reports what the RSU saw.
pub fn run_scenario<C: Curve>(sc: &Scenario) -> Result<SimReport> {
    sc.validate()?;
    let started = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(sc.seed);

    let kmc = MasterKey::<C>::generate(&mut rng);
    let tra = TraceKey::<C>::generate(&mut rng);
    let params = SystemParams::new(
        kmc.public(),
        tra.public(),
        SystemParams::<C>::DEFAULT_MESSAGE_BITS,
        SystemParams::<C>::DEFAULT_ID_LEN,
    )?;
    let rsu = RsuKeys::register(&params, b"RSU-SIM-0", &kmc, &mut rng)?;
    let last_ms = (sc.reports_per_vehicle as u64 - 1) * REPORT_INTERVAL_MS + REPORT_INTERVAL_MS;
    let beacons: Vec<BroadcastPacket<C>> = (0..=last_ms / BEACON_PERIOD_MS)
        .map(|epoch| rsu.make_broadcast(sim_time(epoch * BEACON_PERIOD_MS), &mut rng))
        .collect();

    let horizon = last_ms / 1000 + 3600;
    let validity = ValidityPeriod::new(SIM_EPOCH, SIM_EPOCH + horizon);
    let mut shares: Vec<Vec<ProducerVehicle<C>>> = (0..sc.producers).map(|_| Vec::new()).collect();
    for index in 0..sc.n_vehicles {
        let rid = RealIdentity::from_label(&format!("VIN{index:013}"), params.id_len);
        let vehicle = Vehicle::enroll(&params, rid, &tra, &kmc, validity, &mut rng)?;
        let mut vrng = stream_rng(sc.seed, VEHICLE_STREAM_SALT, index);
        let jitter_ms = vrng.next_u64() % REPORT_INTERVAL_MS;
        shares[index % sc.producers].push(ProducerVehicle {
            index,
            vehicle,
            jitter_ms,
            rng: vrng,
            adversary_rng: stream_rng(sc.seed, ADVERSARY_STREAM_SALT, index),
        });
    }
    let node = RsuNode::new(rsu);
    let setup_ms = started.elapsed().as_secs_f64() * 1e3;

    let producers = shares.len();
    let (tx, rx) = unbounded::<Event>();
    let mut consumer = Consumer { sc, params: &params, node: &node, beacons: &beacons, tally: Tally::default() };
    let mut verify_ms = 0.0;
    let mut signcrypt_ms = 0.0;

    std::thread::scope(|scope| -> Result<()> {
        let produce_start = Instant::now();
        for (producer, fleet) in shares.into_iter().enumerate() {
            let tx = tx.clone();
            let (params, beacons) = (&params, &beacons);
            scope.spawn(move || {
                let event = match produce(producer, fleet, sc, params, beacons, &tx) {
                    Ok(()) => Event::Done { producer },
                    Err(error) => Event::Failed { producer, error },
                };
                let _ = tx.send(event);
            });
        }
        drop(tx);

        let mut watermark: Vec<Option<u64>> = vec![None; producers];
        let mut done = vec![false; producers];
        let mut buffer: BTreeMap<OrderKey, Envelope> = BTreeMap::new();
        let mut failure = None;
        for event in rx.iter() {
            match event {
                Event::Report { producer, envelope } => {
                    watermark[producer] = Some(envelope.sim_ms);
                    buffer.insert(order_key(&envelope), envelope);
                }
                Event::Done { producer } => done[producer] = true,
                Event::Failed { producer, error } => {
                    done[producer] = true;
                    failure.get_or_insert(error);
                }
            }
            if failure.is_some() {
                continue;
            }
            let low = (0..producers)
                .filter(|&p| !done[p])
                .map(|p| watermark[p].unwrap_or(0))
                .min();
            let closable = match low {
                None => u64::MAX,
                Some(w) => w / sc.batch_window_ms * sc.batch_window_ms,
            };
            let split = (closable, 0, 0, 0);
            let pending = buffer.split_off(&split);
            let ready: Vec<Envelope> = std::mem::replace(&mut buffer, pending).into_values().collect();
            if !ready.is_empty() {
                let t = Instant::now();
                consumer.flush(ready)?;
                verify_ms += t.elapsed().as_secs_f64() * 1e3;
            }
        }
        signcrypt_ms = produce_start.elapsed().as_secs_f64() * 1e3 - verify_ms;
        match failure {
            Some(e) => Err(e),
            None => Ok(()),
        }
    })?;

    let tally = consumer.tally;
    let mut isolated = tally.isolated;
    isolated.sort();
    Ok(SimReport {
        messages_sent: tally.sent,
        messages_accepted: tally.accepted,
        messages_rejected: tally.rejected,
        replays_dropped: tally.replays,
        malformed: tally.malformed,
        bad_signers_isolated: isolated.len(),
        batches_processed: tally.batches,
        batches_failed_first_pass: tally.failed_first_pass,
        plaintext_mismatches: tally.mismatches,
        rsu_ops: tally.ops,
        tampered: injected_tampering(sc),
        isolated,
        timings: PhaseTimings {
            setup_ms,
            signcrypt_ms,
            verify_ms,
            total_ms: started.elapsed().as_secs_f64() * 1e3,
        },
    })
}

/// Replays the adversary's coin flips to list the messages it tampered with.
fn injected_tampering(sc: &Scenario) -> Vec<MessageId> {
    let Adversary::Tamper(rate) = sc.adversary else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for vehicle in 0..sc.n_vehicles {
        let mut rng = stream_rng(sc.seed, ADVERSARY_STREAM_SALT, vehicle);
        for seq in 0..sc.reports_per_vehicle {
            if uniform(&mut rng) < rate {
                rng.next_u32();
                rng.next_u64();
                out.push(MessageId { vehicle: vehicle as u32, seq: seq as u32, copy: 0 });
            }
        }
    }
    out.sort();
    out
}

/// A scenario whose adversary replays messages; the replay cache must drop
/// every duplicate before aggregation.
pub fn replay_attack_check<C: Curve>(sc: &Scenario) -> Result<SimReport> {
    match sc.adversary {
        Adversary::Replay(rate) if rate > 0.0 => run_scenario::<C>(sc),
        _ => Err(Error::InvalidParams("replay check needs a replay adversary with a positive rate".into())),
    }
}
