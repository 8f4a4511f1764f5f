//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{attrs_of, depth_three_corpus, field_bits, flip_bit, Expr};
use iotacap::abe::{
    decrypt, encrypt, keygen, parse_policy, setup, Bls12, Decryption, SecretKey, ToyGroup,
};
use iotacap::harness::fixtures::{
    staff_rights, student_rights, updated_student_rights, STAFF_POLICY, STUDENT_ATTRS,
    STUDENT_POLICY,
};
use iotacap::harness::{
    bench_attributes, bench_one_to_many, replay_cost_model, BenchOptions, Deployment,
    BENCH_DIFFICULTY, PROTOTYPE_MEANS,
};
use iotacap::mam::{channel_open, fetch_latest, fetch_message, MamError};
use iotacap::owner::{Reason, Update};
use iotacap::subject::{SubjectError, TapTransport, Transport};
use iotacap::tangle::{PowConfig, TangleStore};
use iotacap::token::Right;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const SEED: u64 = 20_240_601;

type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn pow() -> PowConfig {
    PowConfig {
        difficulty: BENCH_DIFFICULTY,
        ..PowConfig::default()
    }
}

fn iff_correctness() -> Outcome {
    let limit = Duration::from_secs(60);
    let t = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let (pp, mk) = setup::<ToyGroup, _>(&mut rng);
    let keys: Vec<Option<SecretKey<ToyGroup>>> = (0u32..64)
        .map(|m| (m != 0).then(|| keygen(&mk, &attrs_of(m), &mut rng).unwrap()))
        .collect();
    let corpus = depth_three_corpus();
    let mut mismatches = 0usize;
    let mut trials = 0usize;
    for e in &corpus {
        assert!(e.depth() <= 3);
        let policy = parse_policy(&e.render()).unwrap();
        let ct = encrypt(&pp, &policy, b"iff", &mut rng).unwrap();
        for (mask, key) in keys.iter().enumerate() {
            trials += 1;
            let decrypted = match key {
                Some(k) => match decrypt(k, &ct) {
                    Ok(Decryption::Plaintext(p)) => p == b"iff",
                    _ => false,
                },
                None => false,
            };
            let expect = e.eval(mask as u32);
            if decrypted != expect || policy.satisfies(&attrs_of(mask as u32)) != expect {
                mismatches += 1;
            }
        }
    }
    let took = t.elapsed();
    outcome(
        mismatches == 0 && took < limit,
        format!(
            "{} policies x 64 subsets = {trials} trials, {mismatches} mismatches, {:.1}s (limit {}s)",
            corpus.len(),
            took.as_secs_f64(),
            limit.as_secs()
        ),
    )
}

fn collusion() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(SEED + 1);
    let (pp, mk) = setup::<ToyGroup, _>(&mut rng);
    let corpus: Vec<Expr> = depth_three_corpus();
    let mut cases = 0;
    let mut rejected = 0;
    while cases < 100 {
        let e = &corpus[rng.gen_range(0..corpus.len())];
        let (a, b) = (rng.gen_range(1u32..64), rng.gen_range(1u32..64));
        if e.eval(a) || e.eval(b) || !e.eval(a | b) {
            continue;
        }
        cases += 1;
        let ct = encrypt(&pp, &parse_policy(&e.render()).unwrap(), b"m", &mut rng).unwrap();
        let k1 = keygen(&mk, &attrs_of(a), &mut rng).unwrap();
        let k2 = keygen(&mk, &attrs_of(b), &mut rng).unwrap();
        let fails = [k1.spliced_with(&k2), k2.spliced_with(&k1)]
            .iter()
            .all(|k| !matches!(decrypt(k, &ct), Ok(Decryption::Plaintext(_))));
        if fails {
            rejected += 1;
        }
    }
    outcome(
        rejected == 100,
        format!("{rejected}/{cases} pooled-key decryptions failed"),
    )
}

fn scenarios() -> Outcome {
    let run = || -> Result<(Reason, Reason, bool, usize), SubjectError> {
        let mut d = Deployment::<Bls12>::lab(SEED, pow());
        let root = d
            .owner
            .grant_access(STUDENT_POLICY, student_rights())
            .unwrap();
        d.owner.grant_access(STAFF_POLICY, staff_rights()).unwrap();
        d.owner
            .update_access(STUDENT_POLICY, Update::Rights(updated_student_rights()))
            .unwrap();
        let tap = Arc::new(TapTransport::new(d.local_transport()));
        let student = d.subject(STUDENT_ATTRS, tap.clone() as Arc<dyn Transport>);
        let token = student.fetch_token(&root, &d.store)?;
        let granted = student.request_access(&token, "sensor1/temperature", "GET")?;

        let mut tampered = token.clone();
        tampered
            .rights
            .push(Right::new("camera1/snapshot", ["GET"]));
        let tampered = student.request_access(&tampered, "camera1/snapshot", "GET")?;

        tap.clear();
        let stolen = d.owner.current_token(STAFF_POLICY).unwrap();
        let aborted = matches!(
            student.request_access(&stolen, "camera1/snapshot", "GET"),
            Err(SubjectError::NotSatisfied(_))
        );
        Ok((
            granted.reason(),
            tampered.reason(),
            aborted,
            tap.count("/access"),
        ))
    };
    match (run(), run()) {
        (Ok(a), Ok(b)) => {
            let (granted, tampered, aborted, wire) = a;
            let pass = granted == Reason::Ok
                && tampered == Reason::TamperedToken
                && aborted
                && wire == 0
                && a == b;
            outcome(
                pass,
                format!(
                    "granted={granted} tampered={tampered} stolen_aborted={aborted} access_requests_on_wire={wire} deterministic={}",
                    a == b
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("scenario error: {e}")),
    }
}

fn update_semantics() -> Outcome {
    let mut d = Deployment::<ToyGroup>::lab(SEED, pow());
    let root = d
        .owner
        .grant_access(STUDENT_POLICY, student_rights())
        .unwrap();
    d.owner
        .update_access(STUDENT_POLICY, Update::Rights(updated_student_rights()))
        .unwrap();
    let student = d.subject(STUDENT_ATTRS, d.local_transport());
    let token = student.fetch_token(&root, &d.store).unwrap();
    let has_sensor =
        token.has_right("sensor1/temperature", "GET") && token.has_right("sensor1/humidity", "GET");
    let vk = d.owner.registry().by_root(&root).unwrap().verify_key;
    let (_, count) = fetch_latest(&d.store, &root, &vk).unwrap();

    d.owner
        .update_access(STUDENT_POLICY, Update::Inactive)
        .unwrap();
    let revoked = student.fetch_token(&root, &d.store).unwrap();
    let mut requests = 0;
    let mut inactive = 0;
    for t in [&token, &revoked] {
        for (res, act) in [
            ("sensor1/temperature", "GET"),
            ("sensor1/humidity", "GET"),
            ("led1/power", "TURN_ON"),
            ("led1/power", "TURN_OFF"),
            ("camera1/snapshot", "GET"),
        ] {
            requests += 1;
            if student.request_access(t, res, act).unwrap().reason() == Reason::InactiveToken {
                inactive += 1;
            }
        }
    }
    outcome(
        has_sensor && count == 2 && inactive == requests,
        format!(
            "sensor1 rights={has_sensor} message_count={count} inactive_denials={inactive}/{requests}"
        ),
    )
}

fn one_to_many() -> Outcome {
    let limit = Duration::from_secs(600);
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let opts = BenchOptions {
        seed: SEED,
        pow: pow(),
        threads,
    };
    let t = Instant::now();
    let (proposed, dcaci) = bench_one_to_many::<Bls12>(1000, 200, &opts);
    let took = t.elapsed();
    let (p, f, q) = (
        proposed.get("owner_publishes"),
        proposed.get("subject_fetches"),
        dcaci.get("owner_publishes"),
    );
    outcome(
        p == 2 && f == 1200 && q == 1200 && took < limit,
        format!(
            "proposed publishes={p} (2) fetches={f} (1200); dcaci publishes={q} (1200); d={} {:.1}s (limit {}s)",
            opts.pow.difficulty,
            took.as_secs_f64(),
            limit.as_secs()
        ),
    )
}

fn cost_replay() -> Outcome {
    let tol = 1e-6;
    let (dcaci, proposed) = replay_cost_model(&PROTOTYPE_MEANS, 1000, 200).unwrap();
    let rel = |x: f64, want: f64| ((x - want) / want).abs();
    let (e1, e2) = (rel(dcaci, 22209.4), rel(proposed, 4492.169));
    outcome(
        e1 <= tol && e2 <= tol && proposed < dcaci,
        format!(
            "dcaci={dcaci:.3}s (rel err {e1:.1e}) proposed={proposed:.3}s (rel err {e2:.1e}) tol={tol:.0e} proposed<dcaci={}",
            proposed < dcaci
        ),
    )
}

fn scaling() -> Outcome {
    let opts = BenchOptions {
        seed: SEED,
        pow: pow(),
        threads: 1,
    };
    let reports = bench_attributes::<Bls12>(&[3, 6, 9, 12], 1, &opts);
    let col = |k: &str| reports.iter().map(|r| r.get(k)).collect::<Vec<u64>>();
    let (ct, tx, overhead) = (
        col("token_ciphertext_bytes"),
        col("token_transactions"),
        col("request_overhead_bytes"),
    );
    let non_decreasing = |v: &[u64]| v.windows(2).all(|w| w[0] <= w[1]);
    let constant = overhead.windows(2).all(|w| w[0] == w[1]);

    // Same request plaintext encrypted under the owner policy at every level.
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let (pp, _) = setup::<Bls12, _>(&mut rng);
    let owner = parse_policy("Role:Owner").unwrap();
    let fixed: Vec<usize> = (0..4)
        .map(|_| {
            encrypt(&pp, &owner, &[7u8; 600], &mut rng)
                .unwrap()
                .to_bytes()
                .len()
        })
        .collect();
    let fixed_constant = fixed.windows(2).all(|w| w[0] == w[1]);
    outcome(
        non_decreasing(&ct) && non_decreasing(&tx) && constant && fixed_constant,
        format!(
            "ciphertext bytes {ct:?}, transactions {tx:?}, request overhead bytes {overhead:?} (+-0), fixed request ciphertext {fixed:?}"
        ),
    )
}

fn integrity() -> Outcome {
    let store = TangleStore::in_memory(PowConfig {
        difficulty: BENCH_DIFFICULTY,
        payload_capacity: 256,
        nonce_start: 0,
    })
    .unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let mut channels = Vec::new();
    for c in 0..4u8 {
        let mut ch = channel_open(&[c; 32]).unwrap();
        for i in 0..3 {
            let len = rng.gen_range(1..700);
            let body: Vec<u8> = (0..len).map(|j| (i + j) as u8).collect();
            ch.publish(&body, &store).unwrap();
        }
        channels.push(ch);
    }
    let ids = store.transaction_ids();
    let mut detected = 0;
    let trials = 1000;
    for _ in 0..trials {
        let id = ids[rng.gen_range(0..ids.len())];
        let tx = store.transaction(&id).unwrap();
        let bit = rng.gen_range(0..field_bits(&tx));
        store.tamper_with(&id, |t| flip_bit(t, bit)).unwrap();
        let by_digest = !store.verify_transaction(&id).unwrap();
        let ch = channels
            .iter()
            .find(|c| (0..3).any(|i| c.address(i) == tx.address))
            .unwrap();
        let by_signature = matches!(
            fetch_message(&store, &tx.address, &ch.verify_key()),
            Err(MamError::BadSignature(_))
        );
        if by_digest || by_signature {
            detected += 1;
        }
        store.tamper_with(&id, |t| flip_bit(t, bit)).unwrap();
    }
    let clean = ids.iter().all(|id| store.verify_transaction(id).unwrap());

    let mut walks_ok = 0;
    for k in 1..=10u64 {
        let mut ch = channel_open(&[0x40 + k as u8; 32]).unwrap();
        for i in 1..=k {
            ch.publish(format!("msg {i}").as_bytes(), &store).unwrap();
        }
        let (body, count) = fetch_latest(&store, &ch.root(), &ch.verify_key()).unwrap();
        if body == format!("msg {k}").into_bytes() && count as u64 == k {
            walks_ok += 1;
        }
    }
    outcome(
        detected == trials && clean && walks_ok == 10,
        format!("{detected}/{trials} single-bit tampers detected; chain walk correct for {walks_ok}/10 k"),
    )
}

fn otp_discipline() -> Outcome {
    let mut d = Deployment::<ToyGroup>::lab(SEED, pow());
    let root = d
        .owner
        .grant_access(STUDENT_POLICY, updated_student_rights())
        .unwrap();
    d.owner.grant_access(STAFF_POLICY, staff_rights()).unwrap();
    let student = d.subject(STUDENT_ATTRS, d.local_transport());
    let token = student.fetch_token(&root, &d.store).unwrap();
    let ttl = d.owner.otp_registry().ttl();

    let otp = student.authenticate(&token).unwrap();
    let ct = student
        .build_access_request(&token, "sensor1/temperature", "GET", &otp)
        .unwrap();
    let first = d.owner.handle_access_request(&ct);
    let replay = d.owner.handle_access_request(&ct);
    let single_use = first.is_grant() && replay.reason() == Reason::InvalidOtp;

    let otp = student.authenticate(&token).unwrap();
    d.clock.advance(ttl);
    let at_ttl = d.owner.check_otp(STUDENT_POLICY, &otp);
    let otp = student.authenticate(&token).unwrap();
    d.clock.advance(ttl + 1);
    let late = student
        .build_access_request(&token, "sensor1/temperature", "GET", &otp)
        .unwrap();
    let expired = d.owner.handle_access_request(&late).reason() == Reason::InvalidOtp;

    let otp = student.authenticate(&token).unwrap();
    let cross = !d.owner.check_otp(STAFF_POLICY, &otp);
    let still_valid = d.owner.check_otp(STUDENT_POLICY, &otp);

    outcome(
        single_use && at_ttl && expired && cross && still_valid,
        format!(
            "replay rejected={single_use} valid at ttl={at_ttl} rejected at ttl+1={expired} cross-policy rejected={cross} (ttl={ttl}s, manual clock)"
        ),
    )
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("abe iff-correctness", iff_correctness),
        ("collusion rejection", collusion),
        ("scenario replication", scenarios),
        ("update semantics", update_semantics),
        ("one-to-many operation counts", one_to_many),
        ("cost-model replay", cost_replay),
        ("scaling laws", scaling),
        ("tangle/mam integrity", integrity),
        ("otp discipline", otp_discipline),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] {}. {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!("acceptance: {}/9 passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
