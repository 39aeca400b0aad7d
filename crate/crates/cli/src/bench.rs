//! Timed protocol phases with exact operation counts.

use std::io::Write;
use std::time::{Duration, Instant};

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use v2i_signcrypt::counter::{measure, OpCounter};
use v2i_signcrypt::prelude::*;
use v2i_signcrypt::sim::{run_scenario, Scenario};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Signcrypt,
    /// The aggregate check alone.
    Verify,
    Decrypt,
    /// Batch verification followed by decryption.
    Unsigncrypt,
    /// Every protocol phase, one row each.
    Counts,
    /// A full honest simulator run with n vehicles.
    Scenario,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Signcrypt,
    Verify,
    Decrypt,
    Unsigncrypt,
    Scenario,
}

impl Phase {
    fn label(self) -> &'static str {
        match self {
            Phase::Signcrypt => "signcrypt",
            Phase::Verify => "verify",
            Phase::Decrypt => "decrypt",
            Phase::Unsigncrypt => "unsigncrypt",
            Phase::Scenario => "scenario",
        }
    }
}

impl Mode {
    fn phases(self) -> &'static [Phase] {
        match self {
            Mode::Signcrypt => &[Phase::Signcrypt],
            Mode::Verify => &[Phase::Verify],
            Mode::Decrypt => &[Phase::Decrypt],
            Mode::Unsigncrypt => &[Phase::Unsigncrypt],
            Mode::Counts => &[Phase::Signcrypt, Phase::Verify, Phase::Decrypt, Phase::Unsigncrypt],
            Mode::Scenario => &[Phase::Scenario],
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub n_values: Vec<usize>,
    pub reps: usize,
    pub mode: Mode,
    pub seed: u64,
    pub curve: CurveId,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        if self.reps < 3 {
            return Err(Failure::Usage(format!("--reps must be at least 3, got {}", self.reps)));
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Failure::Usage("--n values must be positive".into()));
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Failure::Usage("--n values must be strictly ascending".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub mode: &'static str,
    pub n: usize,
    pub median_ms: f64,
    pub p10_ms: f64,
    pub p90_ms: f64,
    pub ops: OpCounter,
}

pub const HEADER: [&str; 8] = ["mode", "n", "median_ms", "p10_ms", "p90_ms", "scalar_mults", "h1_calls", "h2_calls"];

/// Leading comment line of every CSV.
pub const TIMING_NOTE: &str =
    "# median_ms,p10_ms,p90_ms: wall-clock, machine dependent; scalar_mults,h1_calls,h2_calls: exact";

/// Linear interpolation between closest ranks; `sorted` must be nonempty.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (rank.floor() as usize, rank.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

struct Fixture<C: Curve> {
    rng: ChaCha20Rng,
    params: SystemParams<C>,
    rsu: RsuKeys<C>,
    fleet: Vec<Vehicle<C>>,
    seed: u64,
}

const NOW: u64 = 1_700_000_000;

impl<C: Curve> Fixture<C> {
    fn new(seed: u64, max_n: usize) -> Result<Self, Error> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let kmc = MasterKey::<C>::generate(&mut rng);
        let tra = TraceKey::<C>::generate(&mut rng);
        let params = SystemParams::new(
            kmc.public(),
            tra.public(),
            SystemParams::<C>::DEFAULT_MESSAGE_BITS,
            SystemParams::<C>::DEFAULT_ID_LEN,
        )?;
        let rsu = RsuKeys::register(&params, b"RSU-BENCH", &kmc, &mut rng)?;
        let validity = ValidityPeriod::new(NOW - 3_600, NOW + 3_600);
        let fleet = (0..max_n)
            .map(|i| {
                let rid = RealIdentity::from_label(&format!("BENCH-{i}"), params.id_len);
                Vehicle::enroll(&params, rid, &tra, &kmc, validity, &mut rng)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Fixture { rng, params, rsu, fleet, seed })
    }

    fn signcrypt_all(&mut self, n: usize, beacon: &BroadcastPacket<C>) -> Result<Vec<SigncryptedMessage<C>>, Error> {
        let mut report = vec![0u8; self.params.message_len()];
        let mut out = Vec::with_capacity(n);
        for v in &self.fleet[..n] {
            self.rng.fill_bytes(&mut report);
            out.push(v.signcrypt(&self.params, beacon, &report, Timestamp(NOW), &mut self.rng)?);
        }
        Ok(out)
    }

    /// One repetition on a fresh honest batch; only the phase itself is timed.
    fn run_once(&mut self, phase: Phase, n: usize) -> Result<(Duration, OpCounter), Failure> {
        let beacon = self.rsu.make_broadcast(Timestamp(NOW), &mut self.rng);
        if phase == Phase::Signcrypt {
            let started = Instant::now();
            let (res, ops) = measure(|| self.signcrypt_all(n, &beacon));
            let took = started.elapsed();
            res?;
            return Ok((took, ops));
        }
        if phase == Phase::Scenario {
            let sc = Scenario { n_vehicles: n, seed: self.seed, ..Scenario::default() };
            let started = Instant::now();
            let report = run_scenario::<C>(&sc)?;
            let took = started.elapsed();
            if report.messages_accepted != n {
                return Err(Failure::Runtime(format!("honest scenario accepted {}/{n}", report.messages_accepted)));
            }
            return Ok((took, report.rsu_ops));
        }

        let msgs = self.signcrypt_all(n, &beacon)?;
        let (params, rsu, eta) = (&self.params, &self.rsu, &beacon.eta);
        let started = Instant::now();
        let (ok, ops) = measure(|| match phase {
            Phase::Verify => Ok(rsu.aggregate_holds(params, eta, &msgs)),
            Phase::Decrypt => msgs.iter().map(|m| rsu.decrypt_one(params, m)).collect::<Result<Vec<_>, _>>().map(|_| true),
            Phase::Unsigncrypt => {
                rsu.batch_verify(params, eta, &msgs, Timestamp(NOW)).map(|r| r.verdict == Verdict::Accept)
            }
            Phase::Signcrypt | Phase::Scenario => unreachable!("handled above"),
        });
        let took = started.elapsed();
        if !ok? {
            return Err(Failure::Runtime(format!("honest batch of {n} rejected in {} phase", phase.label())));
        }
        Ok((took, ops))
    }
}

/// Runs the configured benchmark. A warmup repetition precedes the timed ones
/// and is discarded.
pub fn run(cfg: &BenchConfig) -> Result<Vec<Row>, Failure> {
    cfg.validate()?;
    match cfg.curve {
        CurveId::P256 => run_on::<NistP256>(cfg),
        CurveId::Secp256k1 => run_on::<Secp256k1>(cfg),
    }
}

fn run_on<C: Curve>(cfg: &BenchConfig) -> Result<Vec<Row>, Failure> {
    let max_n = if cfg.mode == Mode::Scenario { 0 } else { *cfg.n_values.last().expect("validated") };
    let mut fx = Fixture::<C>::new(cfg.seed, max_n)?;
    let mut rows = Vec::new();
    for &phase in cfg.mode.phases() {
        for &n in &cfg.n_values {
            fx.run_once(phase, n)?;
            let mut times = Vec::with_capacity(cfg.reps);
            let mut counts = None;
            for _ in 0..cfg.reps {
                let (took, ops) = fx.run_once(phase, n)?;
                if counts.is_some_and(|c| c != ops) {
                    return Err(Failure::Runtime(format!("{} n={n}: counts differ between runs", phase.label())));
                }
                counts = Some(ops);
                times.push(took.as_secs_f64() * 1e3);
            }
            times.sort_by(f64::total_cmp);
            rows.push(Row {
                mode: phase.label(),
                n,
                median_ms: percentile(&times, 0.5),
                p10_ms: percentile(&times, 0.1),
                p90_ms: percentile(&times, 0.9),
                ops: counts.expect("reps >= 3"),
            });
        }
    }
    Ok(rows)
}

pub fn write_csv(rows: &[Row], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{TIMING_NOTE}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.mode.to_string(),
            r.n.to_string(),
            format!("{:.4}", r.median_ms),
            format!("{:.4}", r.p10_ms),
            format!("{:.4}", r.p90_ms),
            r.ops.scalar_mults.to_string(),
            r.ops.hashes_h1.to_string(),
            r.ops.hashes_h2.to_string(),
        ])?;
    }
    w.flush()
}
