//! Acceptance gate. Runs every exit criterion at its pinned tolerance,
//! prints one PASS/FAIL line per criterion, and exits nonzero if any fail.
//!
//! `cargo test -p hhsketch --test acceptance`

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use hhsketch::bench::{
    run_lambda_sweep, run_memory_sweep, run_single, Algorithm, ExperimentConfig, ResultRow,
    DEFAULT_LAMBDAS,
};
use hhsketch::elastic::{StdCell, StdInsertOutcome};
use hhsketch::elastic_hh::{HhCell, InsertOutcome};
use hhsketch::{
    generate_zipf, CmHeap, CountHeap, ElasticHh, ElasticStd, FlowKey, HeavyHitterReport,
    HeavyLightRatio, Lambda, Oracle, SpaceSaving, Trace, ZipfSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORKED_EXAMPLE_BUDGET: Duration = Duration::from_secs(1);
const CONSERVATION_TRACES: usize = 1_000;
const CONSERVATION_MAX_PACKETS: usize = 100_000;
const CONSERVATION_MEMORY_KB: (usize, usize) = (1, 64);
const EQUIVALENCE_INSTANCES: usize = 200;
const EQUIVALENCE_MAX_FLOWS: u32 = 50;
const SWEEP_MEMORIES_KB: [usize; 5] = [100, 200, 300, 400, 500];
const SWEEP_BUDGET: Duration = Duration::from_secs(300);
const ERROR_RATIO_VS_ELASTIC: f64 = 2.0;
const LAMBDA_ONE_SLACK: f64 = 0.05;
const DETECTION_FLOOR: f64 = 0.99;
const THROUGHPUT_MEMORY_KB: usize = 300;
const THROUGHPUT_REPEATS: usize = 20;
const THROUGHPUT_RATIO: f64 = 1.2;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn key(v: u32) -> FlowKey {
    FlowKey::new(v).expect("nonzero key")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn default_config() -> ExperimentConfig {
    ExperimentConfig {
        repeats: 0,
        ..ExperimentConfig::default()
    }
}

// ---------------------------------------------------------------------------
// 1. worked examples

fn fill_hh(s: &mut ElasticHh, sizes: [u32; 7]) {
    for (i, &n) in sizes.iter().enumerate() {
        (0..n).for_each(|_| {
            s.insert(key(i as u32 + 1));
        });
    }
}

fn fill_std(s: &mut ElasticStd, sizes: [u32; 7]) {
    for (i, &n) in sizes.iter().enumerate() {
        (0..n).for_each(|_| {
            s.insert(key(i as u32 + 1));
        });
    }
}

fn worked_examples() -> Outcome {
    let start = Instant::now();

    // Elastic_HH: smallest resident has 11 votes, vote- reaches 12 > 11.
    let mut hh = ElasticHh::with_memory(64, 1).map_err(|e| e.to_string())?;
    fill_hh(&mut hh, [20, 30, 25, 40, 18, 11, 50]);
    for i in 0..11 {
        ensure(hh.insert(key(1_000 + i)) == InsertOutcome::Discard, || {
            "noise vote replaced a cell".into()
        })?;
    }
    let f8 = hh.insert(key(8));
    let b = hh.bucket(0);
    ensure(
        f8 == InsertOutcome::Replacement
            && b.cell(5)
                == HhCell {
                    id: Some(key(8)),
                    vote_plus: 12,
                }
            && b.vote_minus() == 0
            && hh.query(key(6)) == 0,
        || {
            format!(
                "hh replacement: {f8:?}, cell {:?}, vote- {}",
                b.cell(5),
                b.vote_minus()
            )
        },
    )?;

    // Elastic_HH: vote- reaches 7, equal to the smallest 7, so discard.
    let mut hh = ElasticHh::with_memory(64, 1).map_err(|e| e.to_string())?;
    fill_hh(&mut hh, [9, 12, 30, 7, 8, 10, 15]);
    for i in 0..6 {
        hh.insert(key(1_000 + i));
    }
    let before: Vec<_> = hh.bucket(0).cells().collect();
    let f9 = hh.insert(key(9));
    let b = hh.bucket(0);
    ensure(
        f9 == InsertOutcome::Discard
            && b.vote_minus() == 7
            && b.cells().collect::<Vec<_>>() == before,
        || format!("hh discard: {f9:?}, vote- {}", b.vote_minus()),
    )?;

    // Standard Elastic: 11/11 < 8 sends f8 to the light part.
    let mut std = ElasticStd::with_memory(86, 3).map_err(|e| e.to_string())?;
    fill_std(&mut std, [20, 30, 25, 40, 18, 11, 50]);
    for i in 0..10 {
        std.insert(key(1_000 + i));
    }
    let light_before = std.light_value(key(8));
    let f8 = std.insert(key(8));
    ensure(
        f8 == StdInsertOutcome::ToLight
            && std.vote_minus(0) == 11
            && std.light_value(key(8)) == light_before + 1
            && std.cell(0, 5)
                == StdCell {
                    id: Some(key(6)),
                    vote_plus: 11,
                    flag: false,
                },
        || format!("std to-light: {f8:?}, vote- {}", std.vote_minus(0)),
    )?;

    // Standard Elastic: 56/7 = 8 evicts f4 and pushes its 7 votes to light.
    let mut std = ElasticStd::with_memory(86, 3).map_err(|e| e.to_string())?;
    fill_std(&mut std, [9, 12, 30, 7, 8, 10, 15]);
    for i in 0..55 {
        std.insert(key(1_000 + i));
    }
    let light_before = std.light_value(key(4));
    let f9 = std.insert(key(9));
    ensure(
        f9 == StdInsertOutcome::Eviction
            && std.cell(0, 3)
                == StdCell {
                    id: Some(key(9)),
                    vote_plus: 1,
                    flag: true,
                }
            && std.vote_minus(0) == 0
            && std.light_value(key(4)) == light_before + 7,
        || format!("std eviction: {f9:?}, cell {:?}", std.cell(0, 3)),
    )?;

    let elapsed = start.elapsed();
    ensure(elapsed < WORKED_EXAMPLE_BUDGET, || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("4 scenarios in {elapsed:?}"))
}

// ---------------------------------------------------------------------------
// 2. conservation

fn random_trace(rng: &mut ChaCha8Rng) -> Trace {
    let packets = rng.gen_range(1..=CONSERVATION_MAX_PACKETS);
    if rng.gen_bool(0.5) {
        let spec = ZipfSpec {
            packets,
            distinct: rng.gen_range(1..=packets.min(50_000)),
            skew: rng.gen_range(0.0..2.0),
            seed: rng.gen(),
        };
        generate_zipf(&spec).expect("valid zipf spec")
    } else {
        let universe = rng.gen_range(1..=u32::MAX);
        (0..packets)
            .map(|_| key(rng.gen_range(1..=universe)))
            .collect()
    }
}

fn conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let (mut violations, mut saturated, mut packets) = (Vec::new(), 0, 0u64);
    for case in 0..CONSERVATION_TRACES {
        let trace = random_trace(&mut rng);
        let memory = rng.gen_range(CONSERVATION_MEMORY_KB.0..=CONSERVATION_MEMORY_KB.1) * 1024;
        let seed = rng.gen();
        let n = trace.len() as u64;
        packets += n;

        let mut hh = ElasticHh::with_memory(memory, seed).map_err(|e| e.to_string())?;
        let mut std = ElasticStd::with_memory(memory, seed).map_err(|e| e.to_string())?;
        for k in trace.iter() {
            hh.insert(k);
            std.insert(k);
        }
        let tally = hh.tally();
        if hh.total_votes() != n - tally.discards || tally.total() != n {
            violations.push(format!(
                "case {case}: hh votes {} tally {tally:?} n {n}",
                hh.total_votes()
            ));
        }
        let overflow = std.light_overflow();
        saturated += usize::from(overflow > 0);
        if std.heavy_votes() + std.light_votes() + overflow != n {
            violations.push(format!(
                "case {case}: std heavy {} + light {} + overflow {overflow} != {n}",
                std.heavy_votes(),
                std.light_votes()
            ));
        }
    }
    ensure(violations.is_empty(), || {
        format!("{} violations, first: {}", violations.len(), violations[0])
    })?;
    Ok(format!(
        "{CONSERVATION_TRACES} traces, {packets} packets, 0 violations ({saturated} with saturated light counters, checked with overflow)"
    ))
}

// ---------------------------------------------------------------------------
// 3. oracle equivalence

fn small_instance(rng: &mut ChaCha8Rng) -> Trace {
    let flows = rng.gen_range(1..=EQUIVALENCE_MAX_FLOWS);
    let ids: Vec<u32> = (0..flows).map(|_| rng.gen_range(1..=u32::MAX)).collect();
    let packets = rng.gen_range(1..=5_000);
    (0..packets)
        .map(|_| key(ids[rng.gen_range(0..ids.len())]))
        .collect()
}

fn exact_report(report: &HeavyHitterReport, truth: &[(FlowKey, u64)]) -> bool {
    let mut got: Vec<_> = report.iter().map(|e| (e.key, e.estimate)).collect();
    got.sort();
    got == truth
}

fn fits_buckets(index: impl Fn(FlowKey) -> usize, oracle: &Oracle, cells: usize) -> bool {
    let mut load: HashMap<usize, usize> = HashMap::new();
    oracle.iter().all(|(k, _)| {
        let l = load.entry(index(k)).or_default();
        *l += 1;
        *l <= cells
    })
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xE0_1A1);
    let mut violations = Vec::new();
    let mut count_checked = 0;
    for case in 0..EQUIVALENCE_INSTANCES {
        let trace = small_instance(&mut rng);
        let oracle = Oracle::build(&trace);
        let max = oracle.iter().map(|(_, c)| c).max().unwrap_or(1);
        let threshold = rng.gen_range(1..=max);
        let mut truth = oracle.true_heavy_hitters(threshold);
        truth.sort();
        let mut fail = |what: &str| violations.push(format!("case {case}: {what}"));

        // Resample hash seeds until every flow has a cell of its own.
        let mut seed: u64 = rng.gen();
        let mut hh = loop {
            let s = ElasticHh::with_memory(64 * 1024, seed).map_err(|e| e.to_string())?;
            if fits_buckets(|k| s.bucket_index(k), &oracle, s.cells_per_bucket()) {
                break s;
            }
            seed += 1;
        };
        let mut std = loop {
            let s = ElasticStd::new(
                64 * 1024,
                Lambda::EIGHT,
                7,
                HeavyLightRatio::default(),
                seed,
            )
            .map_err(|e| e.to_string())?;
            if fits_buckets(|k| s.bucket_index(k), &oracle, s.cells_per_bucket()) {
                break s;
            }
            seed += 1;
        };
        let mut ss = SpaceSaving::with_capacity(EQUIVALENCE_MAX_FLOWS as usize)
            .map_err(|e| e.to_string())?;
        let mut cm = CmHeap::with_dimensions(3, 64, 64, seed).map_err(|e| e.to_string())?;
        let mut count =
            CountHeap::with_dimensions(3, 1 << 12, 64, seed).map_err(|e| e.to_string())?;
        for k in trace.iter() {
            hh.insert(k);
            std.insert(k);
            ss.insert(k);
            cm.insert(k);
            count.insert(k);
        }

        if !exact_report(&hh.report(threshold), &truth) {
            fail("elastic-hh report differs from the true heavy hitters");
        }
        if !exact_report(&std.report(threshold), &truth) {
            fail("elastic report differs from the true heavy hitters");
        }
        if !exact_report(&ss.report(threshold), &truth) {
            fail("space-saving report differs from the true heavy hitters");
        }
        if let Some((k, c)) = oracle.iter().find(|&(k, c)| cm.query(k) < c) {
            fail(&format!(
                "cm query {} below true {c} for {k:?}",
                cm.query(k)
            ));
        }
        let rows = count.sketch();
        let collision_free = (0..3).all(|r| {
            let mut seen = std::collections::HashSet::new();
            oracle.iter().all(|(k, _)| seen.insert(rows.index(r, k)))
        });
        if collision_free {
            count_checked += 1;
            if let Some((k, c)) = oracle.iter().find(|&(k, c)| count.query(k) != c) {
                fail(&format!(
                    "count query {} != true {c} for {k:?}",
                    count.query(k)
                ));
            }
        }
    }
    ensure(violations.is_empty(), || {
        format!("{} violations, first: {}", violations.len(), violations[0])
    })?;
    ensure(count_checked > 0, || {
        "no collision-free count instance".into()
    })?;
    Ok(format!(
        "{EQUIVALENCE_INSTANCES} instances, 0 violations ({count_checked} collision-free for count)"
    ))
}

// ---------------------------------------------------------------------------
// 4. memory sweep

fn row_for(rows: &[ResultRow], algo: Algorithm, memory_kb: usize) -> &ResultRow {
    rows.iter()
        .find(|r| r.config.algo == algo && r.config.memory_kb == memory_kb)
        .expect("sweep row")
}

fn memory_sweep() -> Outcome {
    let start = Instant::now();
    let rows =
        run_memory_sweep(&default_config(), &SWEEP_MEMORIES_KB).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let mut problems = Vec::new();
    for kb in SWEEP_MEMORIES_KB {
        let hh = &row_for(&rows, Algorithm::ElasticHh, kb).accuracy;
        let std = &row_for(&rows, Algorithm::Elastic, kb).accuracy;
        let table: Vec<String> = Algorithm::ALL
            .iter()
            .map(|&a| {
                let acc = &row_for(&rows, a, kb).accuracy;
                format!("{}={:.4}/{:.2e}", a.as_str(), acc.aae, acc.are)
            })
            .collect();
        println!("      {kb:>3} KB aae/are: {}", table.join(" "));

        if hh.aae * ERROR_RATIO_VS_ELASTIC > std.aae || hh.are * ERROR_RATIO_VS_ELASTIC > std.are {
            problems.push(format!(
                "{kb} KB: not {ERROR_RATIO_VS_ELASTIC}x below elastic"
            ));
        }
        for other in Algorithm::ALL
            .into_iter()
            .filter(|&a| a != Algorithm::ElasticHh)
        {
            let o = &row_for(&rows, other, kb).accuracy;
            if hh.aae >= o.aae || hh.are >= o.are {
                problems.push(format!("{kb} KB: not strictly below {}", other.as_str()));
            }
        }
    }
    if elapsed >= SWEEP_BUDGET {
        problems.push(format!("took {elapsed:?}"));
    }
    ensure(problems.is_empty(), || problems.join("; "))?;
    Ok(format!("{} rows in {elapsed:?}", rows.len()))
}

// ---------------------------------------------------------------------------
// 5. lambda sweep

fn lambda_sweep() -> Outcome {
    let lambdas: Vec<Lambda> = DEFAULT_LAMBDAS
        .iter()
        .map(|&(n, d)| Lambda::new(n, d).expect("valid lambda"))
        .collect();
    let rows = run_lambda_sweep(&default_config(), &lambdas).map_err(|e| e.to_string())?;
    let mut hh: Vec<(Lambda, f64, f64)> = rows
        .iter()
        .filter(|r| r.config.algo == Algorithm::ElasticHh)
        .map(|r| {
            (
                r.lambda.expect("explicit lambda"),
                r.accuracy.aae,
                r.accuracy.are,
            )
        })
        .collect();
    hh.sort_by(|a, b| a.0.as_f64().total_cmp(&b.0.as_f64()));
    println!(
        "      lambda aae/are: {}",
        hh.iter()
            .map(|(l, a, r)| format!("{l}={a:.4}/{r:.2e}"))
            .collect::<Vec<_>>()
            .join(" ")
    );

    let mut problems = Vec::new();
    let (_, aae1, are1) = *hh
        .iter()
        .find(|(l, _, _)| *l == Lambda::ONE)
        .expect("lambda 1 in sweep");
    let best_aae = hh.iter().map(|h| h.1).fold(f64::INFINITY, f64::min);
    let best_are = hh.iter().map(|h| h.2).fold(f64::INFINITY, f64::min);
    if aae1 > best_aae * (1.0 + LAMBDA_ONE_SLACK) || are1 > best_are * (1.0 + LAMBDA_ONE_SLACK) {
        problems.push(format!(
            "lambda 1 aae {aae1} / are {are1} vs best {best_aae} / {best_are}"
        ));
    }
    let at_least_one: Vec<_> = hh.iter().filter(|h| h.0.as_f64() >= 1.0).collect();
    for w in at_least_one.windows(2) {
        if w[1].1 < w[0].1 || w[1].2 < w[0].2 {
            problems.push(format!(
                "error decreases from lambda {} to {}",
                w[0].0, w[1].0
            ));
        }
    }
    ensure(problems.is_empty(), || problems.join("; "))?;
    Ok(format!(
        "{} lambdas at {} KB",
        hh.len(),
        default_config().memory_kb
    ))
}

// ---------------------------------------------------------------------------
// 6. detection quality

fn detection() -> Outcome {
    let row = run_single(&default_config()).map_err(|e| e.to_string())?;
    let a = &row.accuracy;
    let summary = format!(
        "pr {:.4} rr {:.4} f1 {:.4} at {} KB",
        a.pr, a.rr, a.f1, row.config.memory_kb
    );
    ensure(
        a.pr >= DETECTION_FLOOR && a.rr >= DETECTION_FLOOR && a.f1 >= DETECTION_FLOOR,
        || summary.clone(),
    )?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// 7. throughput

fn throughput() -> Outcome {
    let mean = |algo| -> Result<f64, String> {
        let config = ExperimentConfig {
            algo,
            memory_kb: THROUGHPUT_MEMORY_KB,
            repeats: THROUGHPUT_REPEATS,
            ..ExperimentConfig::default()
        };
        let row = run_single(&config).map_err(|e| e.to_string())?;
        Ok(row.throughput.expect("repeats > 0").mean_mpps)
    };
    let hh = mean(Algorithm::ElasticHh)?;
    let std = mean(Algorithm::Elastic)?;
    let ratio = hh / std;
    let summary = format!("elastic-hh {hh:.1} Mpps, elastic {std:.1} Mpps, ratio {ratio:.3}");
    ensure(ratio >= THROUGHPUT_RATIO, || {
        format!("{summary} < {THROUGHPUT_RATIO}")
    })?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// 8. determinism

fn determinism() -> Outcome {
    let mut checked = 0;
    for algo in Algorithm::ALL {
        let config = ExperimentConfig {
            algo,
            memory_kb: 100,
            ..default_config()
        };
        let first = run_single(&config).map_err(|e| e.to_string())?;
        let echoed: ResultRow =
            serde_json::from_str(&serde_json::to_string(&first).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
        let replay =
            ExperimentConfig::from_json(&echoed.config.to_json()).map_err(|e| e.to_string())?;
        let second = run_single(&replay).map_err(|e| e.to_string())?;
        ensure(
            first.same_accuracy(&second) && first.config_hash == second.config_hash,
            || format!("{} differs on replay", algo.as_str()),
        )?;
        checked += 1;
    }
    Ok(format!("{checked} algorithms replayed from echoed config"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("worked examples", worked_examples),
        ("conservation", conservation),
        ("oracle equivalence", oracle_equivalence),
        ("memory sweep accuracy", memory_sweep),
        ("lambda sweep", lambda_sweep),
        ("pr/rr/f1 at 300 KB", detection),
        ("throughput ratio", throughput),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name} [{secs:.2}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name} [{secs:.2}s]: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
