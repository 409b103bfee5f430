//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 data or format error, 3 divergent key.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::analysis::{self, ExperimentConfig};
use crate::attacks::{self, AttackReport, FinalCheck, Kpa1Options, Kpa2Options};
use crate::chaos::{keystream, SecretKey};
use crate::cipher::{decrypt, encrypt};
use crate::error::Error;
use crate::imageio::{load_pgm, save_pgm, GrayImage};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "hcbreak", version, about = "Hyperchaos image cipher and its cryptanalysis")]
pub struct Cli {
    /// Worker threads for searches and experiments (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random key and print (or save) its key record.
    Keygen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Encrypt a PGM image.
    Encrypt(CipherArgs),
    /// Decrypt a PGM image.
    Decrypt(CipherArgs),
    /// Write the raw keystream for a key.
    Keystream {
        #[command(flatten)]
        key: KeyArgs,
        /// Number of bytes to produce.
        #[arg(long, conflicts_with = "like")]
        len: Option<usize>,
        /// Produce as many bytes as this image has pixels.
        #[arg(long)]
        like: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a key-recovery attack.
    Attack {
        #[command(subcommand)]
        kind: AttackKind,
    },
    /// Run a statistical experiment.
    Experiment {
        #[command(subcommand)]
        kind: ExperimentKind,
    },
    /// Fraction of pixels two images share.
    Score {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        recovered: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct KeyArgs {
    /// Inline key "x0,y0,z0,w0,n0,c0"; wins over --key-file.
    #[arg(long)]
    pub key: Option<String>,
    /// File holding a single-line key record.
    #[arg(long)]
    pub key_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CipherArgs {
    #[command(flatten)]
    pub key: KeyArgs,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long = "out")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct AttackOutput {
    /// Where to write the JSON report (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory receiving one raw keystream file per candidate.
    #[arg(long)]
    pub keystream_dir: Option<PathBuf>,
    /// A further ciphertext to decrypt with the first candidate.
    #[arg(long)]
    pub apply_to: Option<PathBuf>,
    /// Output path for the --apply-to decryption.
    #[arg(long, requires = "apply_to")]
    pub recovered_out: Option<PathBuf>,
    /// Plaintext of --apply-to, used to score every candidate.
    #[arg(long, requires = "apply_to")]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum AttackKind {
    /// One known plaintext/ciphertext pair.
    Kpa1 {
        #[arg(long)]
        plain: PathBuf,
        #[arg(long)]
        cipher: PathBuf,
        /// Known seed byte.
        #[arg(long)]
        c0: Option<u8>,
        /// Require both first-element checks, not just the wrap-around one.
        #[arg(long)]
        require_both: bool,
        /// Treat c0 as secret and report candidate counts for every c0 in 1..=255.
        #[arg(long, conflicts_with = "c0")]
        search_c0: bool,
        #[command(flatten)]
        output: AttackOutput,
    },
    /// Two known pairs under the same key.
    Kpa2 {
        #[arg(long)]
        plain: PathBuf,
        #[arg(long)]
        cipher: PathBuf,
        #[arg(long)]
        plain2: PathBuf,
        #[arg(long)]
        cipher2: PathBuf,
        /// Accept a guess when either first-element check holds.
        #[arg(long)]
        either_final: bool,
        /// Known seed byte, enables the Confusion I seed check.
        #[arg(long)]
        c0: Option<u8>,
        #[command(flatten)]
        output: AttackOutput,
    },
    /// Chosen-plaintext baseline on the ciphertext of an all-zero image.
    Cpa {
        #[arg(long)]
        cipher: PathBuf,
        /// Plaintext, checked to be all zero.
        #[arg(long)]
        plain: Option<PathBuf>,
        /// Skip the plaintext check and assume the image was all zero.
        #[arg(long)]
        assume_zero: bool,
        #[arg(long)]
        c0: Option<u8>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ExperimentKind {
    /// Candidate-count histogram of the one-pair attack over random keys.
    Fig2 {
        #[arg(long)]
        image: PathBuf,
        /// Second image whose ciphertext wrong candidates try to decrypt.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        keys: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Downsample images to SIZE x SIZE first.
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write (key_index, candidate_count) rows.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Bit-plane confinement of plaintext bit flips.
    Diffusion {
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 64)]
        len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Global and single-position top-bit keystream flips.
    Equivalence {
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 64)]
        len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Early-termination depths of the two-pair search on random data.
    Profile {
        #[arg(long, default_value_t = 4096)]
        len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Divergence { .. } => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses the process arguments and runs; returns the exit code.
pub fn main() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return 1;
        }
        // Fails only if a pool already exists, e.g. repeated in-process runs.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn resolve_key(args: &KeyArgs) -> CliResult<SecretKey> {
    if let Some(inline) = &args.key {
        return Ok(inline.parse()?);
    }
    if let Some(path) = &args.key_file {
        let text = fs::read_to_string(path).map_err(Error::from)?;
        return Ok(text.trim().parse()?);
    }
    Err(usage("a key is required: pass --key or --key-file"))
}

fn write_doc(path: Option<&Path>, doc: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(doc).expect("document serializes");
    match path {
        Some(p) => fs::write(p, text + "\n").map_err(Error::from)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Keygen { seed, out } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cfg = ExperimentConfig::default();
            // redraw until the trajectory stays bounded for a typical image size
            let key = loop {
                let key = analysis::sample_key(&cfg, &mut rng);
                if keystream(&key, 4).is_ok() {
                    break key;
                }
            };
            match out {
                Some(p) => fs::write(p, key.to_record() + "\n").map_err(Error::from)?,
                None => println!("{}", key.to_record()),
            }
            Ok(())
        }
        Command::Encrypt(args) => run_cipher(args, true),
        Command::Decrypt(args) => run_cipher(args, false),
        Command::Keystream { key, len, like, out } => {
            let key = resolve_key(&key)?;
            let len = match (len, like) {
                (Some(n), _) => n,
                (None, Some(img)) => load_pgm(img)?.pixels.len(),
                (None, None) => return Err(usage("pass --len or --like")),
            };
            let ks = keystream(&key, len)?;
            fs::write(out, ks.as_bytes()).map_err(Error::from)?;
            println!("keystream fingerprint {}", ks.fingerprint());
            Ok(())
        }
        Command::Attack { kind } => run_attack(kind),
        Command::Experiment { kind } => run_experiment(kind),
        Command::Score { reference, recovered } => {
            let a = load_pgm(reference)?;
            let b = load_pgm(recovered)?;
            let score = attacks::score_recovery(&a.pixels, &b.pixels)?;
            println!("{score:.6}");
            Ok(())
        }
    }
}

fn run_cipher(args: CipherArgs, forward: bool) -> CliResult<()> {
    let key = resolve_key(&args.key)?;
    let img = load_pgm(&args.input)?;
    let ks = keystream(&key, img.pixels.len())?;
    let out = if forward {
        encrypt(&img.pixels, &ks, key.c0)?
    } else {
        decrypt(&img.pixels, &ks, key.c0)?
    };
    save_pgm(&args.output, &img.with_pixels(out)?)?;
    println!("keystream fingerprint {}", ks.fingerprint());
    Ok(())
}

fn load_matching(paths: &[&Path]) -> CliResult<Vec<GrayImage>> {
    let imgs = paths.iter().map(load_pgm).collect::<crate::error::Result<Vec<_>>>()?;
    let len = imgs[0].pixels.len();
    if let Some(bad) = imgs.iter().find(|i| i.pixels.len() != len) {
        return Err(Error::LengthMismatch {
            expected: len,
            actual: bad.pixels.len(),
        }
        .into());
    }
    Ok(imgs)
}

fn finish_attack(
    mut report: AttackReport,
    output: &AttackOutput,
    known_c0: Option<u8>,
    config: BTreeMap<String, String>,
) -> CliResult<()> {
    report.config.extend(config);
    report.config.insert("version".into(), VERSION.into());
    if let Some(dir) = &output.keystream_dir {
        fs::create_dir_all(dir).map_err(Error::from)?;
        for c in &report.candidates {
            let name = dir.join(format!("keystream_{:03}_{:03}.bin", c.k_l1, c.k_l));
            fs::write(name, &c.keystream).map_err(Error::from)?;
        }
    }
    if let Some(third) = &output.apply_to {
        let cipher = load_pgm(third)?;
        check_apply_len(&report, &cipher)?;
        if let Some(reference) = &output.reference {
            let reference = load_pgm(reference)?;
            report.score_against(&cipher.pixels, &reference.pixels, known_c0)?;
        }
        match report.candidates.first() {
            Some(first) => {
                let plain = first.apply(&cipher.pixels, known_c0)?;
                if let Some(out) = &output.recovered_out {
                    save_pgm(out, &cipher.with_pixels(plain)?)?;
                }
            }
            None => eprintln!("warning: no candidate survived; nothing to apply"),
        }
    }
    eprintln!(
        "{}: {} candidate(s) from {} guesses",
        report.attack,
        report.candidates.len(),
        report.guesses_tested
    );
    write_doc(output.out.as_deref(), &report)
}

fn check_apply_len(report: &AttackReport, cipher: &GrayImage) -> CliResult<()> {
    if cipher.pixels.len() != report.length {
        return Err(Error::LengthMismatch {
            expected: report.length,
            actual: cipher.pixels.len(),
        }
        .into());
    }
    Ok(())
}

fn run_attack(kind: AttackKind) -> CliResult<()> {
    match kind {
        AttackKind::Kpa1 {
            plain,
            cipher,
            c0,
            require_both,
            search_c0,
            output,
        } => {
            let imgs = load_matching(&[&plain, &cipher])?;
            let opts = Kpa1Options { c0, require_both };
            let mut report = attacks::kpa_one(&imgs[0].pixels, &imgs[1].pixels, &opts)?;
            if search_c0 {
                for (c0, n) in attacks::c0_sweep(&report) {
                    report.notes.push(format!("c0={c0}: {n} candidate(s)"));
                }
            }
            let mut config = BTreeMap::new();
            config.insert("plain".into(), plain.display().to_string());
            config.insert("cipher".into(), cipher.display().to_string());
            config.insert("search_c0".into(), search_c0.to_string());
            finish_attack(report, &output, c0, config)
        }
        AttackKind::Kpa2 {
            plain,
            cipher,
            plain2,
            cipher2,
            either_final,
            c0,
            output,
        } => {
            let imgs = load_matching(&[&plain, &cipher, &plain2, &cipher2])?;
            let opts = Kpa2Options {
                final_check: if either_final {
                    FinalCheck::Either
                } else {
                    FinalCheck::Both
                },
                c0,
            };
            let report = attacks::kpa_two(
                &imgs[0].pixels,
                &imgs[1].pixels,
                &imgs[2].pixels,
                &imgs[3].pixels,
                &opts,
            )?;
            let mut config = BTreeMap::new();
            for (name, p) in [
                ("plain", &plain),
                ("cipher", &cipher),
                ("plain2", &plain2),
                ("cipher2", &cipher2),
            ] {
                config.insert(name.into(), p.display().to_string());
            }
            finish_attack(report, &output, c0, config)
        }
        AttackKind::Cpa {
            cipher,
            plain,
            assume_zero,
            c0,
            out,
        } => {
            let c = load_pgm(&cipher)?;
            if let Some(plain) = &plain {
                let p = load_pgm(plain)?;
                if p.pixels.iter().any(|v| *v != 0) {
                    eprintln!(
                        "warning: the chosen-plaintext attack expects an all-zero plaintext; \
                         candidate sets will not contain the true pairs"
                    );
                }
            } else if assume_zero {
                eprintln!("warning: assuming the ciphertext encrypts an all-zero image (unchecked)");
            }
            let report = attacks::cpa_fatih(&c.pixels, c0)?;
            let sizes: Vec<usize> = report.positions.iter().map(|p| p.pairs.len()).collect();
            let doc = json!({
                "attack": "cpa",
                "version": VERSION,
                "config": {
                    "cipher": cipher.display().to_string(),
                    "c0": c0,
                    "assume_zero": assume_zero,
                },
                "length": c.pixels.len(),
                "pair_evaluations": report.pair_evaluations,
                "pairs_per_position": attacks::PAIRS_PER_POSITION,
                "candidate_set_sizes": sizes,
            });
            write_doc(out.as_deref(), &doc)
        }
    }
}

fn run_experiment(kind: ExperimentKind) -> CliResult<()> {
    match kind {
        ExperimentKind::Fig2 {
            image,
            target,
            keys,
            seed,
            size,
            out,
            csv,
        } => {
            let prep = |p: &Path| -> CliResult<GrayImage> {
                let img = load_pgm(p)?;
                Ok(match size {
                    Some(s) => img.downsample(s, s)?,
                    None => img,
                })
            };
            let img = prep(&image)?;
            let target_img = target.as_deref().map(prep).transpose()?;
            let cfg = ExperimentConfig {
                n_keys: keys,
                seed,
                ..Default::default()
            };
            let hist = analysis::candidate_count_experiment(
                &cfg,
                &img.pixels,
                target_img.as_ref().map(|t| t.pixels.as_slice()),
            )?;
            if let Some(path) = csv {
                fs::write(path, hist.to_csv()).map_err(Error::from)?;
            }
            eprintln!(
                "median {} | unique {:.1}% | below 6 {:.1}% | min {} max {}",
                hist.median,
                100.0 * hist.fraction_unique,
                100.0 * hist.fraction_below_6,
                hist.min,
                hist.max
            );
            let doc = json!({
                "experiment": "fig2",
                "version": VERSION,
                "seed": seed,
                "config": {
                    "image": image.display().to_string(),
                    "target": target.map(|t| t.display().to_string()),
                    "keys": keys,
                    "size": size,
                    "state_range": [0.0, cfg.state_max],
                    "n0_range": cfg.n0_range,
                    "c0_range": cfg.c0_range,
                },
                "result": hist,
            });
            write_doc(out.as_deref(), &doc)
        }
        ExperimentKind::Diffusion { trials, len, seed, out } => {
            if len == 0 {
                return Err(usage("--len must be positive"));
            }
            let violations = analysis::diffusion_trials(trials, len, seed)?;
            for (plane, v) in violations.iter().enumerate() {
                println!("plane {plane}: {v} violation(s)");
            }
            println!("per-plane violation count = {}", violations.iter().sum::<u64>());
            let doc = json!({
                "experiment": "diffusion",
                "version": VERSION,
                "seed": seed,
                "config": { "trials": trials, "len": len },
                "violations_per_plane": violations,
            });
            match out {
                Some(p) => write_doc(Some(&p), &doc),
                None => Ok(()),
            }
        }
        ExperimentKind::Equivalence { trials, len, seed, out } => {
            if len == 0 {
                return Err(usage("--len must be positive"));
            }
            let differing = analysis::flip_equivalence_trials(trials, len, seed)?;
            println!("global MSB-flip: {differing} differing bytes");
            let probe = analysis::single_flip_probe(4, trials, seed)?;
            for (j, n) in probe.changed.iter().enumerate() {
                println!(
                    "single flip at position {} (L=4): ciphertext changed in {n}/{} trials, {} outside the MSB plane",
                    j + 1,
                    probe.trials,
                    probe.changed_below_msb[j]
                );
            }
            let doc = json!({
                "experiment": "equivalence",
                "version": VERSION,
                "seed": seed,
                "config": { "trials": trials, "len": len },
                "global_flip_differing_bytes": differing,
                "single_flip_probe": probe,
            });
            match out {
                Some(p) => write_doc(Some(&p), &doc),
                None => Ok(()),
            }
        }
        ExperimentKind::Profile { len, seed, out } => {
            if len < 5 {
                return Err(usage("--len must be at least 5"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cfg = ExperimentConfig {
                n_keys: 1,
                seed,
                ..Default::default()
            };
            let (keys, _) = analysis::sample_keystreams(&cfg, len)?;
            let (key, k) = &keys[0];
            let mut p1 = vec![0u8; len];
            let mut p2 = vec![0u8; len];
            rand::Rng::fill(&mut rng, &mut p1[..]);
            rand::Rng::fill(&mut rng, &mut p2[..]);
            let c1 = encrypt(&p1, k, key.c0)?;
            let c2 = encrypt(&p2, k, key.c0)?;
            let profile = analysis::termination_profile(&p1, &c1, &p2, &c2)?;
            println!(
                "wrong guesses {} | survive 1 condition: {} ({:.5}, uniform model {:.5})",
                profile.wrong_guesses,
                profile.survival[1],
                profile.first_survival_ratio(),
                1.0 / 256.0
            );
            let doc = json!({
                "experiment": "profile",
                "version": VERSION,
                "seed": seed,
                "config": { "len": len, "key": key.to_record() },
                "result": profile,
            });
            match out {
                Some(p) => write_doc(Some(&p), &doc),
                None => Ok(()),
            }
        }
    }
}
