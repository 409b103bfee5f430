//! Known- and chosen-plaintext attacks recovering the equivalent key.
//!
//! One known plaintext/ciphertext pair pins down the whole intermediate
//! sequence and all but the last two keystream bytes once `(k(L-1), k(L))`
//! is fixed, so both known-plaintext attacks search that 16-bit pair. The
//! top bit of `k(L)` is never searched: flipping the top bit of every
//! keystream byte leaves the cipher unchanged, so each guess `(a, b)` with
//! `b < 128` stands for the class `{(a, b), (a ^ 0x80, b ^ 0x80)}`.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cipher::{decrypt, modadd, modsub};
use crate::error::{check_len, Error, Result};

/// Size of the canonical guess space, `256 * 128`.
pub const GUESS_SPACE: u64 = 256 * 128;

/// Pair evaluations spent on one ciphertext position by the chosen-plaintext attack.
pub const PAIRS_PER_POSITION: u64 = 256 * 256;

fn guess_of(index: usize) -> (u8, u8) {
    ((index >> 7) as u8, (index & 0x7f) as u8)
}

/// One recovered keystream together with its verification outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateKeystream {
    #[serde(rename = "kL1")]
    pub k_l1: u8,
    #[serde(rename = "kL")]
    pub k_l: u8,
    #[serde(skip)]
    pub keystream: Vec<u8>,
    /// Recovered `t` for the first known pair.
    #[serde(skip)]
    pub intermediate: Vec<u8>,
    /// `None` when no `c0` was available to check against.
    pub passed_eq3: Option<bool>,
    pub passed_eq5: bool,
    /// The seed byte this candidate implies for the (first) known pair.
    pub implied_c0: u8,
    pub fingerprint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl CandidateKeystream {
    fn new(
        guess: (u8, u8),
        keystream: Vec<u8>,
        intermediate: Vec<u8>,
        passed_eq3: Option<bool>,
        passed_eq5: bool,
        implied_c0: u8,
    ) -> Self {
        let fingerprint = keystream.iter().take(8).map(|b| format!("{b:02x}")).collect();
        CandidateKeystream {
            k_l1: guess.0,
            k_l: guess.1,
            keystream,
            intermediate,
            passed_eq3,
            passed_eq5,
            implied_c0,
            fingerprint,
            score: None,
        }
    }

    /// Decrypts another ciphertext under this candidate. Falls back to the
    /// implied seed byte when `c0` is not given.
    pub fn apply(&self, cipher: &[u8], c0: Option<u8>) -> Result<Vec<u8>> {
        decrypt(cipher, &self.keystream, c0.unwrap_or(self.implied_c0))
    }

    /// True when `k` equals this candidate's keystream up to a global top-bit flip.
    pub fn same_class(&self, k: &[u8]) -> bool {
        self.keystream == k || self.keystream.iter().zip(k).all(|(a, b)| a ^ 0x80 == *b)
    }
}

mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1e3)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let ms = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(ms.max(0.0) / 1e3))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub attack: String,
    pub length: usize,
    pub guesses_tested: u64,
    /// Elementary byte operations (xor, add, sub, compare) performed.
    pub work_ops: u64,
    #[serde(rename = "wall_time_ms", with = "duration_ms")]
    pub elapsed: Duration,
    pub candidates: Vec<CandidateKeystream>,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub config: BTreeMap<String, String>,
}

impl AttackReport {
    /// Decrypts `cipher` with every candidate and records the fraction of
    /// bytes matching `reference`.
    pub fn score_against(&mut self, cipher: &[u8], reference: &[u8], c0: Option<u8>) -> Result<()> {
        for cand in &mut self.candidates {
            let recovered = cand.apply(cipher, c0)?;
            cand.score = Some(score_recovery(reference, &recovered)?);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))
    }
}

fn check_pair(p: &[u8], c: &[u8], min: usize) -> Result<()> {
    check_len(p.len(), c.len())?;
    if p.len() < min {
        return Err(Error::LengthTooShort { min, actual: p.len() });
    }
    Ok(())
}

/// Rebuilds `k` and `t` from one known pair and a guess for `(k(L-1), k(L))`.
pub fn backward_recover(p: &[u8], c: &[u8], k_l1: u8, k_l: u8) -> Result<(Vec<u8>, Vec<u8>)> {
    check_pair(p, c, 3)?;
    let n = p.len();
    let mut k = vec![0u8; n];
    let mut t = vec![0u8; n];
    k[n - 1] = k_l;
    k[n - 2] = k_l1;
    t[n - 1] = c[n - 1] ^ k_l1 ^ modadd(c[n - 2], k_l);
    for i in (1..n - 1).rev() {
        t[i] = modsub(t[i + 1] ^ p[i + 1] ^ k[i], k[i + 1]);
        k[i - 1] = c[i] ^ t[i] ^ modadd(c[i - 1], k[i]);
    }
    t[0] = modsub(t[1] ^ p[1] ^ k[0], k[1]);
    Ok((k, t))
}

/// Checks the two first-element equations: `t(1)` against the Confusion I
/// seed and `c(1)` against the Confusion II wrap-around.
pub fn verify_candidate(p: &[u8], c: &[u8], k: &[u8], t: &[u8], c0: u8) -> (bool, bool) {
    let n = t.len();
    let eq3 = t[0] == p[0] ^ k[0] ^ modadd(c0, k[0]);
    let eq5 = c[0] == t[0] ^ k[0] ^ modadd(t[n - 1], k[0]);
    (eq3, eq5)
}

/// The `c0` for which the Confusion I seed equation holds.
pub fn implied_c0(p1: u8, t1: u8, k1: u8) -> u8 {
    modsub(t1 ^ p1 ^ k1, k1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Kpa1Options {
    /// Known seed byte. `None` models a secret `c0`.
    pub c0: Option<u8>,
    /// With a known `c0`, keep only candidates passing both first-element
    /// checks; otherwise the wrap-around check alone. With a secret `c0`,
    /// additionally drop candidates implying the invalid seed 0.
    pub require_both: bool,
}

impl Default for Kpa1Options {
    fn default() -> Self {
        Kpa1Options {
            c0: None,
            require_both: true,
        }
    }
}

const LANES: usize = 1024;

struct LaneOutcome {
    index: usize,
    eq3: Option<bool>,
    eq5: bool,
    implied: u8,
}

// Walks LANES consecutive guesses in lock step so the per-position update
// vectorizes; only the registers needed for the final checks are kept.
fn kpa_one_lanes(p: &[u8], c: &[u8], opts: &Kpa1Options, start: usize) -> Vec<LaneOutcome> {
    let n = p.len();
    let mut t_next = [0u8; LANES];
    let mut k_cur = [0u8; LANES];
    let mut k_next = [0u8; LANES];
    let mut t_last = [0u8; LANES];
    for j in 0..LANES {
        let (a, b) = guess_of(start + j);
        k_cur[j] = a;
        k_next[j] = b;
        t_last[j] = c[n - 1] ^ a ^ c[n - 2].wrapping_add(b);
        t_next[j] = t_last[j];
    }
    for i in (1..n - 1).rev() {
        let (pn, ci, cp) = (p[i + 1], c[i], c[i - 1]);
        for j in 0..LANES {
            let t = (t_next[j] ^ pn ^ k_cur[j]).wrapping_sub(k_next[j]);
            let k_prev = ci ^ t ^ cp.wrapping_add(k_cur[j]);
            t_next[j] = t;
            k_next[j] = k_cur[j];
            k_cur[j] = k_prev;
        }
    }
    let mut out = Vec::new();
    for j in 0..LANES {
        let k1 = k_cur[j];
        let t1 = (t_next[j] ^ p[1] ^ k1).wrapping_sub(k_next[j]);
        let eq5 = c[0] == t1 ^ k1 ^ t_last[j].wrapping_add(k1);
        let implied = implied_c0(p[0], t1, k1);
        let eq3 = opts.c0.map(|c0| implied == c0);
        let keep = match (opts.require_both, eq3) {
            (true, Some(e3)) => eq5 && e3,
            (true, None) => eq5 && implied != 0,
            (false, _) => eq5,
        };
        if keep {
            out.push(LaneOutcome {
                index: start + j,
                eq3,
                eq5,
                implied,
            });
        }
    }
    out
}

/// Exhaustive search over the canonical guess space with one known pair.
pub fn kpa_one(p: &[u8], c: &[u8], opts: &Kpa1Options) -> Result<AttackReport> {
    check_pair(p, c, 3)?;
    if opts.c0 == Some(0) {
        return Err(Error::InvalidKey("c0 must lie in [1, 255]".into()));
    }
    let started = Instant::now();
    let survivors: Vec<LaneOutcome> = (0..GUESS_SPACE as usize / LANES)
        .into_par_iter()
        .flat_map_iter(|chunk| kpa_one_lanes(p, c, opts, chunk * LANES))
        .collect();

    let mut candidates = Vec::with_capacity(survivors.len());
    for s in survivors {
        let guess = guess_of(s.index);
        let (k, t) = backward_recover(p, c, guess.0, guess.1)?;
        candidates.push(CandidateKeystream::new(guess, k, t, s.eq3, s.eq5, s.implied));
    }
    candidates.sort_by_key(|c| (c.k_l1, c.k_l));

    let mut config = BTreeMap::new();
    config.insert("c0".into(), opts.c0.map_or("secret".into(), |v| v.to_string()));
    config.insert("require_both".into(), opts.require_both.to_string());
    Ok(AttackReport {
        attack: "kpa1".into(),
        length: p.len(),
        guesses_tested: GUESS_SPACE,
        // t(L): 3, each interior position: 6, t(1): 3, two checks: 3 each.
        work_ops: GUESS_SPACE * 6 * p.len() as u64,
        elapsed: started.elapsed(),
        candidates,
        notes: Vec::new(),
        config,
    })
}

/// Candidate counts per seed byte for a secret-`c0` run: how many
/// candidates would pass both checks had `c0` been each value in turn.
pub fn c0_sweep(report: &AttackReport) -> BTreeMap<u8, usize> {
    let mut counts = BTreeMap::new();
    for c in report.candidates.iter().filter(|c| c.passed_eq5 && c.implied_c0 != 0) {
        *counts.entry(c.implied_c0).or_insert(0) += 1;
    }
    counts
}

/// How the two first-element checks at the end of the two-pair chain combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FinalCheck {
    #[default]
    Both,
    Either,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Kpa2Options {
    pub final_check: FinalCheck,
    /// When given, candidates must also satisfy the Confusion I seed
    /// equation for both pairs.
    pub c0: Option<u8>,
}

/// Outcome of walking one guess through the two-pair chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainWalk {
    pub k_l1: u8,
    pub k_l: u8,
    /// Number of agreement conditions satisfied before the first failure.
    pub depth: usize,
    /// Whether the whole chain and the final checks passed.
    pub accepted: bool,
    pub work_ops: u64,
    eq3: Option<bool>,
    eq5: bool,
    implied: u8,
}

struct PairRefs<'a> {
    p1: &'a [u8],
    c1: &'a [u8],
    p2: &'a [u8],
    c2: &'a [u8],
}

fn walk_guess(d: &PairRefs<'_>, guess: (u8, u8), opts: &Kpa2Options) -> ChainWalk {
    let PairRefs { p1, c1, p2, c2 } = *d;
    let n = p1.len();
    let (k_l1, k_l) = guess;
    let t1_last = c1[n - 1] ^ k_l1 ^ modadd(c1[n - 2], k_l);
    let t2_last = c2[n - 1] ^ k_l1 ^ modadd(c2[n - 2], k_l);
    let (mut t1, mut t2) = (t1_last, t2_last);
    let (mut k_cur, mut k_next) = (k_l1, k_l);
    let mut ops = 6u64;
    let mut depth = 0usize;
    let mut walk = ChainWalk {
        k_l1,
        k_l,
        depth: 0,
        accepted: false,
        work_ops: 0,
        eq3: None,
        eq5: false,
        implied: 0,
    };
    for i in (1..n - 1).rev() {
        t1 = modsub(t1 ^ p1[i + 1] ^ k_cur, k_next);
        t2 = modsub(t2 ^ p2[i + 1] ^ k_cur, k_next);
        let from1 = c1[i] ^ t1 ^ modadd(c1[i - 1], k_cur);
        let from2 = c2[i] ^ t2 ^ modadd(c2[i - 1], k_cur);
        ops += 13;
        if from1 != from2 {
            walk.depth = depth;
            walk.work_ops = ops;
            return walk;
        }
        depth += 1;
        k_next = k_cur;
        k_cur = from1;
    }
    let k1 = k_cur;
    let t1_first = modsub(t1 ^ p1[1] ^ k1, k_next);
    let t2_first = modsub(t2 ^ p2[1] ^ k1, k_next);
    let ok1 = c1[0] == t1_first ^ k1 ^ modadd(t1_last, k1);
    let ok2 = c2[0] == t2_first ^ k1 ^ modadd(t2_last, k1);
    ops += 12;
    let eq5 = match opts.final_check {
        FinalCheck::Both => ok1 && ok2,
        FinalCheck::Either => ok1 || ok2,
    };
    let implied1 = implied_c0(p1[0], t1_first, k1);
    let implied2 = implied_c0(p2[0], t2_first, k1);
    let eq3 = opts.c0.map(|c0| implied1 == c0 && implied2 == c0);
    if eq3.is_some() {
        ops += 6;
    }
    walk.depth = depth;
    walk.work_ops = ops;
    walk.eq3 = eq3;
    walk.eq5 = eq5;
    walk.implied = implied1;
    walk.accepted = eq5 && eq3.unwrap_or(true);
    walk
}

fn check_two(p1: &[u8], c1: &[u8], p2: &[u8], c2: &[u8]) -> Result<()> {
    check_pair(p1, c1, 5)?;
    check_len(p1.len(), p2.len())?;
    check_len(p1.len(), c2.len())
}

/// Walks every canonical guess through the two-pair chain, in guess order.
pub fn chain_walks(p1: &[u8], c1: &[u8], p2: &[u8], c2: &[u8], opts: &Kpa2Options) -> Result<Vec<ChainWalk>> {
    check_two(p1, c1, p2, c2)?;
    let d = PairRefs { p1, c1, p2, c2 };
    Ok((0..GUESS_SPACE as usize)
        .into_par_iter()
        .map(|g| walk_guess(&d, guess_of(g), opts))
        .collect())
}

/// Two known pairs under one keystream: the second pair turns every
/// position into an agreement check on the implied `k(i-1)`, so wrong
/// guesses die after a handful of positions.
pub fn kpa_two(p1: &[u8], c1: &[u8], p2: &[u8], c2: &[u8], opts: &Kpa2Options) -> Result<AttackReport> {
    let started = Instant::now();
    let walks = chain_walks(p1, c1, p2, c2, opts)?;
    let work_ops = walks.iter().map(|w| w.work_ops).sum();

    let mut candidates = Vec::new();
    for w in walks.iter().filter(|w| w.accepted) {
        let (k, t) = backward_recover(p1, c1, w.k_l1, w.k_l)?;
        candidates.push(CandidateKeystream::new((w.k_l1, w.k_l), k, t, w.eq3, w.eq5, w.implied));
    }

    let mut notes = Vec::new();
    if p1 == p2 && c1 == c2 {
        notes.push(
            "identical known pairs: every agreement condition holds trivially, \
             the search carries no more information than a single pair"
                .to_string(),
        );
    } else if c1 == c2 {
        notes.push("identical ciphertexts with different plaintexts: pairs are inconsistent".into());
    }

    let mut config = BTreeMap::new();
    config.insert("final_check".into(), format!("{:?}", opts.final_check).to_lowercase());
    config.insert("c0".into(), opts.c0.map_or("unused".into(), |v| v.to_string()));
    Ok(AttackReport {
        attack: "kpa2".into(),
        length: p1.len(),
        guesses_tested: GUESS_SPACE,
        work_ops,
        elapsed: started.elapsed(),
        candidates,
        notes,
        config,
    })
}

/// Pairs `(t(i-1), k(i))` consistent with one ciphertext position of the
/// all-zero plaintext. For position 1 the pair is `(t(L), k(1))`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionCandidates {
    /// 1-based position.
    pub position: usize,
    pub pairs: Vec<(u8, u8)>,
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FatihReport {
    pub positions: Vec<PositionCandidates>,
    pub pair_evaluations: u64,
}

impl FatihReport {
    pub fn position(&self, position: usize) -> Option<&PositionCandidates> {
        self.positions.iter().find(|p| p.position == position)
    }
}

/// Chosen-plaintext baseline: with `p = 0`, every position satisfies
/// `c(i) = (t(i-1) + k(i)) ^ (c(i-1) + k(i))`; enumerate all 2^16 pairs
/// per position. Position 1 is included only when `c0` is known.
pub fn cpa_fatih(c: &[u8], c0: Option<u8>) -> Result<FatihReport> {
    if c.len() < 2 {
        return Err(Error::LengthTooShort {
            min: 2,
            actual: c.len(),
        });
    }
    let scan = |position: usize, target: u8, partner: u8| {
        let mut pairs = Vec::new();
        for prev in 0..=255u8 {
            for k in 0..=255u8 {
                if modadd(prev, k) ^ modadd(partner, k) == target {
                    pairs.push((prev, k));
                }
            }
        }
        PositionCandidates {
            position,
            pairs,
            evaluations: PAIRS_PER_POSITION,
        }
    };
    let mut positions = Vec::with_capacity(c.len());
    if let Some(c0) = c0 {
        positions.push(scan(1, c[0], c0));
    }
    positions.extend(
        (1..c.len())
            .into_par_iter()
            .map(|i| scan(i + 1, c[i], c[i - 1]))
            .collect::<Vec<_>>(),
    );
    let pair_evaluations = positions.iter().map(|p| p.evaluations).sum();
    Ok(FatihReport {
        positions,
        pair_evaluations,
    })
}

/// Fraction of positions where the two sequences agree.
pub fn score_recovery(reference: &[u8], recovered: &[u8]) -> Result<f64> {
    check_len(reference.len(), recovered.len())?;
    if reference.is_empty() {
        return Ok(1.0);
    }
    let same = reference.iter().zip(recovered).filter(|(a, b)| a == b).count();
    Ok(same as f64 / reference.len() as f64)
}
