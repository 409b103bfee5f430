//! Structural defects of the cipher and the experiments that measure them.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{chain_walks, kpa_one, score_recovery, Kpa1Options, Kpa2Options};
use crate::chaos::{keystream, HyperState, SecretKey};
use crate::cipher::{confusion1, encrypt};
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prop2Check {
    pub bits: u32,
    pub cases: u64,
    pub counterexample: Option<(u32, u32)>,
}

impl Prop2Check {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Exhaustively checks `(a ^ 2^(n-1)) + b == (a + b) ^ 2^(n-1)` modulo `2^n`.
pub fn prop2_identity(bits: u32) -> Result<Prop2Check> {
    if !(1..=16).contains(&bits) {
        return Err(Error::Precondition(format!("bit width must be in 1..=16, got {bits}")));
    }
    let modulus = 1u32 << bits;
    let mask = modulus - 1;
    let top = 1u32 << (bits - 1);
    let mut counterexample = None;
    'outer: for a in 0..modulus {
        for b in 0..modulus {
            if ((a ^ top) + b) & mask != ((a + b) & mask) ^ top {
                counterexample = Some((a, b));
                break 'outer;
            }
        }
    }
    Ok(Prop2Check {
        bits,
        cases: u64::from(modulus) * u64::from(modulus),
        counterexample,
    })
}

fn flip_all(k: &[u8]) -> Vec<u8> {
    k.iter().map(|b| b ^ 0x80).collect()
}

/// Whether flipping the top bit of every keystream byte leaves the ciphertext unchanged.
pub fn keystream_flip_equivalence(p: &[u8], k: &[u8], c0: u8) -> Result<bool> {
    Ok(encrypt(p, k, c0)? == encrypt(p, &flip_all(k), c0)?)
}

/// Outcome of flipping the top bit of a single keystream byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleFlipProbe {
    pub length: usize,
    pub trials: u64,
    /// Per 1-based position: trials where the ciphertext changed.
    pub changed: Vec<u64>,
    /// Per 1-based position: trials where a bit other than the top bit changed.
    pub changed_below_msb: Vec<u64>,
    /// First observed `(p, k, c0, position)` whose ciphertext changed.
    pub counterexample: Option<(Vec<u8>, Vec<u8>, u8, usize)>,
}

/// Random search for single-position top-bit flips that alter the ciphertext.
pub fn single_flip_probe(length: usize, trials: u64, seed: u64) -> Result<SingleFlipProbe> {
    if length == 0 {
        return Err(Error::LengthTooShort { min: 1, actual: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = SingleFlipProbe {
        length,
        trials,
        changed: vec![0; length],
        changed_below_msb: vec![0; length],
        counterexample: None,
    };
    for _ in 0..trials {
        let p = random_bytes(&mut rng, length);
        let k = random_bytes(&mut rng, length);
        let c0 = rng.gen_range(1..=255u8);
        let base = encrypt(&p, &k, c0)?;
        for j in 0..length {
            let mut k2 = k.clone();
            k2[j] ^= 0x80;
            let other = encrypt(&p, &k2, c0)?;
            if other != base {
                probe.changed[j] += 1;
                if base.iter().zip(&other).any(|(a, b)| (a ^ b) & 0x7f != 0) {
                    probe.changed_below_msb[j] += 1;
                }
                if probe.counterexample.is_none() {
                    probe.counterexample = Some((p.clone(), k.clone(), c0, j + 1));
                }
            }
        }
    }
    Ok(probe)
}

/// Per-byte XOR difference between two ciphertexts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffusionMask(pub Vec<u8>);

impl DiffusionMask {
    /// Lowest bit plane with any change, if any bit changed.
    pub fn lowest_plane(&self) -> Option<u32> {
        self.0.iter().filter(|m| **m != 0).map(|m| m.trailing_zeros()).min()
    }

    /// Number of changed bits strictly below `plane`.
    pub fn bits_below(&self, plane: u32) -> u32 {
        let low = (1u16 << plane) as u8 - 1;
        self.0.iter().map(|m| (m & low).count_ones()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|m| *m == 0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }
}

/// Flips bit `bit` of plaintext byte `position` (1-based) and diffs the ciphertexts.
pub fn diffusion_mask(p: &[u8], k: &[u8], c0: u8, position: usize, bit: u32) -> Result<DiffusionMask> {
    if position == 0 || position > p.len() {
        return Err(Error::Precondition(format!(
            "position {position} outside 1..={}",
            p.len()
        )));
    }
    if bit > 7 {
        return Err(Error::Precondition(format!("bit index {bit} outside 0..=7")));
    }
    let base = encrypt(p, k, c0)?;
    let mut q = p.to_vec();
    q[position - 1] ^= 1 << bit;
    let other = encrypt(&q, k, c0)?;
    Ok(DiffusionMask(base.iter().zip(&other).map(|(a, b)| a ^ b).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_keys: usize,
    pub seed: u64,
    /// Initial-state components are drawn uniformly from `(0, state_max]`.
    pub state_max: f64,
    pub n0_range: (u64, u64),
    pub c0_range: (u8, u8),
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_keys: 100,
            seed: 0,
            state_max: 10.0,
            n0_range: (501, 1500),
            c0_range: (1, 255),
        }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.n_keys == 0 {
            return Err(Error::Precondition("n_keys must be at least 1".into()));
        }
        if !(self.state_max > 0.0 && self.state_max.is_finite()) {
            return Err(Error::Precondition("state_max must be positive".into()));
        }
        if self.n0_range.0 <= 500 || self.n0_range.0 > self.n0_range.1 {
            return Err(Error::Precondition("n0 range must lie above 500".into()));
        }
        if self.c0_range.0 == 0 || self.c0_range.0 > self.c0_range.1 {
            return Err(Error::Precondition("c0 range must lie in [1, 255]".into()));
        }
        Ok(())
    }
}

fn random_bytes(rng: &mut impl Rng, len: usize) -> Vec<u8> {
    let mut v = vec![0u8; len];
    rng.fill(&mut v[..]);
    v
}

/// Draws a key from the configured ranges.
pub fn sample_key(cfg: &ExperimentConfig, rng: &mut impl Rng) -> SecretKey {
    let mut comp = || cfg.state_max - rng.gen_range(0.0..cfg.state_max);
    let initial = HyperState::new(comp(), comp(), comp(), comp());
    let n0 = rng.gen_range(cfg.n0_range.0..=cfg.n0_range.1);
    let c0 = rng.gen_range(cfg.c0_range.0..=cfg.c0_range.1);
    SecretKey::new(initial, n0, c0).expect("sampled key within valid ranges")
}

/// A key and its keystream.
pub type SampledKey = (SecretKey, Vec<u8>);

/// Samples `cfg.n_keys` keys together with their keystreams of length `len`,
/// redrawing keys whose trajectory diverges. Returns the number of redraws.
pub fn sample_keystreams(cfg: &ExperimentConfig, len: usize) -> Result<(Vec<SampledKey>, usize)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.n_keys);
    let mut redraws = 0;
    while out.len() < cfg.n_keys {
        let key = sample_key(cfg, &mut rng);
        match keystream(&key, len) {
            Ok(ks) => out.push((key, ks.into_bytes())),
            Err(Error::Divergence { .. }) => {
                redraws += 1;
                if redraws > 100 * cfg.n_keys {
                    return Err(Error::Precondition(
                        "key ranges produce only divergent trajectories".into(),
                    ));
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok((out, redraws))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyTrial {
    pub key_index: usize,
    pub key: String,
    pub candidate_count: usize,
    pub true_key_present: bool,
    /// Best and worst recovery fraction of the target image among wrong candidates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wrong_candidate_scores: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateHistogram {
    pub seed: u64,
    pub n_keys: usize,
    pub length: usize,
    pub redrawn_keys: usize,
    pub trials: Vec<KeyTrial>,
    /// candidate count -> number of keys
    pub histogram: BTreeMap<usize, usize>,
    pub fraction_unique: f64,
    pub fraction_below_6: f64,
    pub median: f64,
    pub min: usize,
    pub max: usize,
}

impl CandidateHistogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("key_index,candidate_count\n");
        for t in &self.trials {
            out.push_str(&format!("{},{}\n", t.key_index, t.candidate_count));
        }
        out
    }
}

fn median(values: &mut [usize]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    }
}

/// For each sampled key: encrypt `image`, run the one-pair attack with the
/// seed byte known and both checks required, and count survivors. When
/// `target` is given, every wrong survivor also decrypts the target's
/// ciphertext and its pixel recovery is recorded.
pub fn candidate_count_experiment(
    cfg: &ExperimentConfig,
    image: &[u8],
    target: Option<&[u8]>,
) -> Result<CandidateHistogram> {
    if image.len() < 3 {
        return Err(Error::LengthTooShort {
            min: 3,
            actual: image.len(),
        });
    }
    if let Some(t) = target {
        check_len(image.len(), t.len())?;
    }
    let (keys, redrawn_keys) = sample_keystreams(cfg, image.len())?;
    let trials: Vec<KeyTrial> = keys
        .par_iter()
        .enumerate()
        .map(|(key_index, (key, k))| -> Result<KeyTrial> {
            let c = encrypt(image, k, key.c0)?;
            let opts = Kpa1Options {
                c0: Some(key.c0),
                require_both: true,
            };
            let report = kpa_one(image, &c, &opts)?;
            let true_key_present = report.candidates.iter().any(|cand| cand.same_class(k));
            let wrong_candidate_scores = match target {
                Some(target) => {
                    let tc = encrypt(target, k, key.c0)?;
                    let mut scores = Vec::new();
                    for cand in report.candidates.iter().filter(|cand| !cand.same_class(k)) {
                        scores.push(score_recovery(target, &cand.apply(&tc, Some(key.c0))?)?);
                    }
                    (!scores.is_empty()).then(|| {
                        let best = scores.iter().cloned().fold(f64::MIN, f64::max);
                        let worst = scores.iter().cloned().fold(f64::MAX, f64::min);
                        (best, worst)
                    })
                }
                None => None,
            };
            Ok(KeyTrial {
                key_index,
                key: key.to_record(),
                candidate_count: report.candidates.len(),
                true_key_present,
                wrong_candidate_scores,
            })
        })
        .collect::<Result<_>>()?;

    let mut histogram = BTreeMap::new();
    for t in &trials {
        *histogram.entry(t.candidate_count).or_insert(0) += 1;
    }
    let mut counts: Vec<usize> = trials.iter().map(|t| t.candidate_count).collect();
    let n = counts.len() as f64;
    let fraction_unique = counts.iter().filter(|c| **c == 1).count() as f64 / n;
    let fraction_below_6 = counts.iter().filter(|c| **c < 6).count() as f64 / n;
    let med = median(&mut counts);
    Ok(CandidateHistogram {
        seed: cfg.seed,
        n_keys: cfg.n_keys,
        length: image.len(),
        redrawn_keys,
        min: counts[0],
        max: counts[counts.len() - 1],
        trials,
        histogram,
        fraction_unique,
        fraction_below_6,
        median: med,
    })
}

/// Ciphertext change caused by altering one keystream byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationEffect {
    /// 1-based position of the altered keystream byte.
    pub position: usize,
    pub delta: i8,
    pub bits_changed: u64,
    /// Fraction of bits changed from `position` to the end.
    pub fraction_from_position: f64,
    /// Bytes strictly before `position` (ignoring `c(1)`) that changed.
    pub prefix_bytes_changed: usize,
    pub first_byte_changed: bool,
    /// Intermediate bytes strictly before `position` that changed.
    pub intermediate_prefix_changed: usize,
}

pub fn perturbation_effect(p: &[u8], k: &[u8], c0: u8, position: usize, delta: i8) -> Result<PerturbationEffect> {
    if position == 0 || position > k.len() {
        return Err(Error::Precondition(format!(
            "position {position} outside 1..={}",
            k.len()
        )));
    }
    let base = encrypt(p, k, c0)?;
    let mut k2 = k.to_vec();
    k2[position - 1] = k2[position - 1].wrapping_add(delta as u8);
    let other = encrypt(p, &k2, c0)?;
    let t_base = confusion1(p, k, c0)?;
    let t_other = confusion1(p, &k2, c0)?;
    let diff: Vec<u8> = base.iter().zip(&other).map(|(a, b)| a ^ b).collect();
    let tail = &diff[position - 1..];
    let tail_bits: u64 = tail.iter().map(|d| u64::from(d.count_ones())).sum();
    Ok(PerturbationEffect {
        position,
        delta,
        bits_changed: diff.iter().map(|d| u64::from(d.count_ones())).sum(),
        fraction_from_position: tail_bits as f64 / (8 * tail.len()) as f64,
        prefix_bytes_changed: diff[1.min(position - 1)..position - 1]
            .iter()
            .filter(|d| **d != 0)
            .count(),
        first_byte_changed: diff[0] != 0,
        intermediate_prefix_changed: t_base[..position - 1]
            .iter()
            .zip(&t_other[..position - 1])
            .filter(|(a, b)| a != b)
            .count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeySensitivityReport {
    pub length: usize,
    /// Ciphertext bits changed by flipping the top bit of every keystream byte.
    pub global_flip_bits_changed: u64,
    pub perturbation: PerturbationEffect,
}

/// Contrasts the global top-bit flip (no effect at all) with a random
/// ±1 change of one keystream byte.
pub fn key_sensitivity_report(p: &[u8], k: &[u8], c0: u8, seed: u64) -> Result<KeySensitivityReport> {
    let base = encrypt(p, k, c0)?;
    let flipped = encrypt(p, &flip_all(k), c0)?;
    let global_flip_bits_changed = base
        .iter()
        .zip(&flipped)
        .map(|(a, b)| u64::from((a ^ b).count_ones()))
        .sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let position = rng.gen_range(1..=k.len());
    let delta = if rng.gen::<bool>() { 1 } else { -1 };
    Ok(KeySensitivityReport {
        length: p.len(),
        global_flip_bits_changed,
        perturbation: perturbation_effect(p, k, c0, position, delta)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminationProfile {
    pub length: usize,
    pub wrong_guesses: u64,
    /// `exact_depth[d]`: wrong guesses abandoned after satisfying exactly `d` conditions.
    pub exact_depth: Vec<u64>,
    /// `survival[d]`: wrong guesses satisfying at least `d` conditions.
    pub survival: Vec<u64>,
    /// Guesses passing the whole chain and the final checks.
    pub accepted: Vec<(u8, u8)>,
    pub accepted_depths: Vec<usize>,
}

impl TerminationProfile {
    /// Fraction of wrong guesses surviving the first condition.
    pub fn first_survival_ratio(&self) -> f64 {
        self.survival.get(1).copied().unwrap_or(0) as f64 / self.wrong_guesses.max(1) as f64
    }
}

/// Depth reached by every guess of the two-pair search.
pub fn termination_profile(p1: &[u8], c1: &[u8], p2: &[u8], c2: &[u8]) -> Result<TerminationProfile> {
    let walks = chain_walks(p1, c1, p2, c2, &Kpa2Options::default())?;
    let max_depth = p1.len() - 2;
    let mut exact_depth = vec![0u64; max_depth + 1];
    let mut accepted = Vec::new();
    let mut accepted_depths = Vec::new();
    for w in &walks {
        if w.accepted {
            accepted.push((w.k_l1, w.k_l));
            accepted_depths.push(w.depth);
        } else {
            exact_depth[w.depth] += 1;
        }
    }
    let mut survival = vec![0u64; max_depth + 1];
    let mut running = 0;
    for d in (0..=max_depth).rev() {
        running += exact_depth[d];
        survival[d] = running;
    }
    Ok(TerminationProfile {
        length: p1.len(),
        wrong_guesses: survival[0],
        exact_depth,
        survival,
        accepted,
        accepted_depths,
    })
}

/// Total ciphertext bytes changed by the global flip over random instances.
pub fn flip_equivalence_trials(trials: u64, length: usize, seed: u64) -> Result<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut differing = 0u64;
    for _ in 0..trials {
        let p = random_bytes(&mut rng, length);
        let k = random_bytes(&mut rng, length);
        let c0 = rng.gen_range(1..=255u8);
        let a = encrypt(&p, &k, c0)?;
        let b = encrypt(&p, &flip_all(&k), c0)?;
        differing += a.iter().zip(&b).filter(|(x, y)| x != y).count() as u64;
    }
    Ok(differing)
}

/// Random plaintext bit flips; `violations[b]` counts changed ciphertext
/// bits below plane `b` after flipping a bit in plane `b`.
pub fn diffusion_trials(trials: u64, length: usize, seed: u64) -> Result<[u64; 8]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = [0u64; 8];
    for _ in 0..trials {
        let p = random_bytes(&mut rng, length);
        let k = random_bytes(&mut rng, length);
        let c0 = rng.gen_range(1..=255u8);
        let position = rng.gen_range(1..=length);
        for bit in 0..8u32 {
            let mask = diffusion_mask(&p, &k, c0, position, bit)?;
            violations[bit as usize] += u64::from(mask.bits_below(bit));
        }
    }
    Ok(violations)
}
