//! Benchmarks. Assertions elsewhere bind only to the counts and sizes
//! recorded here; wall-clock figures are informational.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::cost::{
    break_even_subjects, replay_cost_model, CostModel, NonPositiveModel, PROTOTYPE_MEANS,
};
use super::dcaci::DcaciState;
use super::fixtures::{
    derive_seed, staff_rights, student_rights, Deployment, STAFF_ATTRS, STAFF_POLICY,
    STUDENT_ATTRS, STUDENT_POLICY,
};
use crate::abe::{AttributeSet, PairingGroup};
use crate::mam::{fetch_latest, MamMessage};
use crate::owner::{AccessRequest, Update};
use crate::subject::{SubjectState, TapTransport, Transport};
use crate::tangle::{Address, PowConfig, TangleStore};
use crate::token::Right;

/// Proof-of-work difficulty used by default for benchmarks.
pub const BENCH_DIFFICULTY: u32 = 4;

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub seed: u64,
    pub pow: PowConfig,
    /// Worker threads for independent subject fetches.
    pub threads: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            pow: PowConfig {
                difficulty: BENCH_DIFFICULTY,
                ..PowConfig::default()
            },
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scenario: String,
    pub params: BTreeMap<String, u64>,
    pub counts: BTreeMap<String, u64>,
    pub wall_clock_s: BTreeMap<String, f64>,
    pub modeled_s: BTreeMap<String, f64>,
}

impl BenchReport {
    fn new(scenario: &str) -> Self {
        Self {
            scenario: scenario.to_owned(),
            ..Self::default()
        }
    }

    fn param(mut self, k: &str, v: u64) -> Self {
        self.params.insert(k.to_owned(), v);
        self
    }

    fn count(&mut self, k: &str, v: u64) {
        self.counts.insert(k.to_owned(), v);
    }

    fn time(&mut self, k: &str, since: Instant) {
        self.wall_clock_s
            .insert(k.to_owned(), since.elapsed().as_secs_f64());
    }

    /// Panics if the count was not recorded.
    pub fn get(&self, k: &str) -> u64 {
        *self
            .counts
            .get(k)
            .unwrap_or_else(|| panic!("report {} has no count {k}", self.scenario))
    }
}

pub fn write_json_lines<W: Write>(reports: &[BenchReport], mut out: W) -> io::Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Three rights, held fixed while the policy grows.
pub fn fixed_rights() -> Vec<Right> {
    vec![
        Right::new("led1/power", ["TURN_ON", "TURN_OFF"]),
        Right::new("sensor1/temperature", ["GET"]),
        Right::new("sensor1/humidity", ["GET"]),
    ]
}

/// Conjunction of the first `n` attributes of a fixed universe.
pub fn attribute_level_policy(n: usize) -> (String, String) {
    let attrs: Vec<String> = (1..=n).map(|i| format!("Attr{i:02}:Yes")).collect();
    (attrs.join(" AND "), attrs.join(", "))
}

fn first_message_sizes(store: &TangleStore, root: &Address) -> (u64, u64) {
    let payloads = store.fetch_bundles(root).expect("tangle is consistent");
    let envelope = payloads
        .first()
        .expect("granted channel has a first message");
    let body = MamMessage::decode(envelope)
        .expect("owner writes valid envelopes")
        .body;
    (body.len() as u64, envelope.len() as u64)
}

pub fn bench_attributes<G: PairingGroup>(
    levels: &[usize],
    reps: usize,
    opts: &BenchOptions,
) -> Vec<BenchReport> {
    assert!(reps >= 1, "reps must be at least 1");
    let max = levels.iter().copied().max().unwrap_or(0);
    let (_, universe) = attribute_level_policy(max);
    let universe = AttributeSet::parse_list(&universe).unwrap_or_default();
    let mut out = Vec::new();
    for &n in levels {
        let (policy, attrs) = attribute_level_policy(n);
        let mut report = BenchReport::new("attributes")
            .param("attributes", n as u64)
            .param("reps", reps as u64);
        let mut totals: BTreeMap<&str, f64> = BTreeMap::new();
        for rep in 0..reps {
            let mut d =
                Deployment::<G>::new(opts.seed.wrapping_add(rep as u64), opts.pow, &universe);
            let store_handle = Arc::clone(&d.store);
            let metrics = store_handle.metrics();

            let t = Instant::now();
            let before = metrics.snapshot();
            let root = d
                .owner
                .grant_access(&policy, fixed_rights())
                .expect("owner covers the universe");
            let grant = metrics.snapshot() - before;
            *totals.entry("grant").or_default() += t.elapsed().as_secs_f64();

            let subject = d.subject(&attrs, d.local_transport());
            let t = Instant::now();
            let token = subject
                .fetch_token(&root, &d.store)
                .expect("key satisfies policy");
            *totals.entry("fetch").or_default() += t.elapsed().as_secs_f64();

            let t = Instant::now();
            d.owner
                .update_access(&policy, Update::Rights(fixed_rights()))
                .expect("policy exists");
            *totals.entry("update").or_default() += t.elapsed().as_secs_f64();
            let token_after = subject
                .fetch_token(&root, &d.store)
                .expect("key satisfies policy");
            assert_ne!(token.id, token_after.id);

            let t = Instant::now();
            let decision = subject
                .request_access(&token_after, "sensor1/temperature", "GET")
                .expect("owner reachable");
            *totals.entry("verify").or_default() += t.elapsed().as_secs_f64();
            assert!(decision.is_grant(), "level {n}: {decision:?}");

            if rep == 0 {
                let (ct_bytes, envelope_bytes) = first_message_sizes(&d.store, &root);
                let otp = "0".repeat(32);
                let request = AccessRequest {
                    resource: "sensor1/temperature".into(),
                    action: "GET".into(),
                    token: token_after.clone(),
                    otp: otp.clone(),
                };
                let plain = request.to_canonical_bytes().expect("valid token").len() as u64;
                let ct = subject
                    .build_access_request(&token_after, "sensor1/temperature", "GET", &otp)
                    .expect("non-empty otp")
                    .len() as u64;
                report.count("token_ciphertext_bytes", ct_bytes);
                report.count("token_envelope_bytes", envelope_bytes);
                report.count("token_transactions", grant.transactions_attached);
                report.count("token_bundles", grant.bundles_attached);
                report.count("request_plaintext_bytes", plain);
                report.count("request_ciphertext_bytes", ct);
                report.count("request_overhead_bytes", ct - plain);
            }
        }
        for (k, v) in totals {
            report
                .wall_clock_s
                .insert(format!("{k}_mean"), v / reps as f64);
        }
        out.push(report);
    }
    out
}

/// Runs `f` over `items` on up to `threads` scoped threads.
fn fan_out<T: Sync, F: Fn(&T) + Sync>(items: &[T], threads: usize, f: F) {
    let threads = threads.max(1).min(items.len().max(1));
    let chunk = items.len().div_ceil(threads).max(1);
    std::thread::scope(|s| {
        for part in items.chunks(chunk) {
            let f = &f;
            s.spawn(move || part.iter().for_each(f));
        }
    });
}

/// Authorizes `n_students` + `n_staff` subjects under both schemes and
/// returns `(proposed, dcaci)`.
pub fn bench_one_to_many<G: PairingGroup>(
    n_students: u64,
    n_staff: u64,
    opts: &BenchOptions,
) -> (BenchReport, BenchReport) {
    let mut proposed = BenchReport::new("one_to_many_proposed")
        .param("students", n_students)
        .param("staff", n_staff);
    let mut d = Deployment::<G>::lab(opts.seed, opts.pow);
    let store_handle = Arc::clone(&d.store);
    let metrics = store_handle.metrics();

    let t = Instant::now();
    let before = metrics.snapshot();
    let student_root = d
        .owner
        .grant_access(STUDENT_POLICY, student_rights())
        .expect("fresh policy");
    let staff_root = d
        .owner
        .grant_access(STAFF_POLICY, staff_rights())
        .expect("fresh policy");
    let publish = metrics.snapshot() - before;
    proposed.time("publish", t);

    let t = Instant::now();
    let mut subjects: Vec<(SubjectState<G>, Address)> = Vec::new();
    let transport = d.local_transport();
    for _ in 0..n_students {
        subjects.push((
            d.subject(STUDENT_ATTRS, Arc::clone(&transport)),
            student_root,
        ));
    }
    for _ in 0..n_staff {
        subjects.push((d.subject(STAFF_ATTRS, Arc::clone(&transport)), staff_root));
    }
    proposed.time("key_issue", t);

    let t = Instant::now();
    let before = metrics.snapshot();
    let store = &d.store;
    fan_out(&subjects, opts.threads, |(s, root)| {
        s.fetch_token(root, store)
            .expect("subject key satisfies its policy");
    });
    let fetch = metrics.snapshot() - before;
    proposed.time("obtain", t);

    proposed.count("owner_publishes", d.owner.publish_count());
    proposed.count("owner_bundles_attached", publish.bundles_attached);
    proposed.count("owner_transactions", publish.transactions_attached);
    proposed.count("subject_fetches", fetch.channel_walks);
    proposed.count("subject_bundle_reads", fetch.bundle_fetches);
    proposed.count("subject_bundles_attached", fetch.bundles_attached);

    let mut dcaci = BenchReport::new("one_to_many_dcaci")
        .param("students", n_students)
        .param("staff", n_staff);
    let store = TangleStore::in_memory(opts.pow).expect("valid pow config");
    let mut state = DcaciState::new("owner1", derive_seed(opts.seed, b"dcaci"));
    let t = Instant::now();
    let before = store.metrics().snapshot();
    for i in 0..n_students {
        state
            .dcaci_grant(&format!("student_{i:04}"), student_rights(), &store)
            .expect("fresh subject");
    }
    for i in 0..n_staff {
        state
            .dcaci_grant(&format!("staff_{i:04}"), staff_rights(), &store)
            .expect("fresh subject");
    }
    let grants = store.metrics().snapshot() - before;
    dcaci.time("grant", t);
    dcaci.count("owner_publishes", state.publish_count());
    dcaci.count("owner_bundles_attached", grants.bundles_attached);
    dcaci.count("owner_transactions", grants.transactions_attached);
    dcaci.count("channels", state.channel_count() as u64);
    dcaci.count("subject_fetches", 0);

    let (dcaci_total, proposed_total) =
        replay_cost_model(&PROTOTYPE_MEANS, n_students, n_staff).expect("constant model");
    proposed.modeled_s.insert("total".into(), proposed_total);
    dcaci.modeled_s.insert("total".into(), dcaci_total);
    (proposed, dcaci)
}

/// Cost-model totals for a population, as a report.
pub fn replay_report(
    model: &CostModel,
    n_students: u64,
    n_staff: u64,
) -> Result<BenchReport, NonPositiveModel> {
    let (dcaci, proposed) = replay_cost_model(model, n_students, n_staff)?;
    let mut r = BenchReport::new("replay")
        .param("students", n_students)
        .param("staff", n_staff);
    r.modeled_s.insert("dcaci_total".into(), dcaci);
    r.modeled_s.insert("proposed_total".into(), proposed);
    if let Some(n) = break_even_subjects(model)? {
        r.count("break_even_subjects", n);
    }
    Ok(r)
}

pub fn policy_scaling_policy(i: usize) -> String {
    format!("Group:G{i:03} AND Role:Student")
}

fn message_counts(d: &Deployment<impl PairingGroup>) -> BTreeMap<Address, usize> {
    d.owner
        .registry()
        .entries()
        .iter()
        .map(|e| {
            (
                e.root,
                fetch_latest(&d.store, &e.root, &e.verify_key)
                    .map(|(_, n)| n)
                    .unwrap_or(0),
            )
        })
        .collect()
}

pub fn bench_policies<G: PairingGroup>(levels: &[usize], opts: &BenchOptions) -> Vec<BenchReport> {
    let mut out = Vec::new();
    for &n in levels {
        let mut report = BenchReport::new("policies").param("policies", n as u64);
        let universe: AttributeSet = (0..n.max(1))
            .map(|i| format!("Group:G{i:03}").parse().expect("valid attribute"))
            .chain(std::iter::once(
                "Role:Student".parse().expect("valid attribute"),
            ))
            .collect();
        let mut d = Deployment::<G>::new(opts.seed, opts.pow, &universe);
        let store_handle = Arc::clone(&d.store);
        let metrics = store_handle.metrics();

        let t = Instant::now();
        let mut first_root = None;
        for i in 0..n {
            let root = d
                .owner
                .grant_access(&policy_scaling_policy(i), fixed_rights())
                .expect("fresh policy");
            first_root.get_or_insert(root);
        }
        report.time("publish_all", t);
        report.count("owner_publishes", d.owner.publish_count());
        let Some(root) = first_root else {
            out.push(report);
            continue;
        };

        let tap = Arc::new(TapTransport::new(d.local_transport()));
        let subject = d.subject(
            "Group:G000, Role:Student",
            Arc::clone(&tap) as Arc<dyn Transport>,
        );
        let t = Instant::now();
        let before = metrics.snapshot();
        let token = subject
            .fetch_token(&root, &d.store)
            .expect("key satisfies policy 0");
        let fetch = metrics.snapshot() - before;
        report.time("fetch", t);
        report.count("fetch_channel_walks", fetch.channel_walks);
        report.count("fetch_bundle_reads", fetch.bundle_fetches);

        let t = Instant::now();
        let before = metrics.snapshot();
        let decision = subject
            .request_access(&token, "sensor1/temperature", "GET")
            .expect("owner reachable");
        let verify = metrics.snapshot() - before;
        report.time("verify", t);
        assert!(decision.is_grant());
        report.count("verify_messages", tap.exchanges().len() as u64);
        report.count("verify_channel_walks", verify.channel_walks);
        report.count("verify_bundle_reads", verify.bundle_fetches);

        let counts_before = message_counts(&d);
        let before = metrics.snapshot();
        d.owner
            .update_access(&policy_scaling_policy(0), Update::Rights(fixed_rights()))
            .expect("policy exists");
        let update = metrics.snapshot() - before;
        let counts_after = message_counts(&d);
        let touched = counts_before
            .iter()
            .filter(|(root, c)| counts_after.get(*root) != Some(*c))
            .count();
        report.count("update_channels_touched", touched as u64);
        report.count("update_bundles_attached", update.bundles_attached);
        out.push(report);
    }
    out
}
