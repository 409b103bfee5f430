use hcbreak::attacks::{
    backward_recover, c0_sweep, chain_walks, kpa_one, kpa_two, verify_candidate, FinalCheck, Kpa1Options, Kpa2Options,
    GUESS_SPACE,
};
use hcbreak::chaos::{keystream, SecretKey};
use hcbreak::cipher::encrypt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_bytes(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.gen()).collect()
}

#[test]
fn wrong_guess_check_rates() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 256;
    let (mut eq3, mut eq5, mut both, mut total) = (0u64, 0u64, 0u64, 0u64);
    for _ in 0..4 {
        let p = random_bytes(&mut rng, n);
        let k = random_bytes(&mut rng, n);
        let c = encrypt(&p, &k, 9).unwrap();
        for a in 0..=255u8 {
            for b in 0..128u8 {
                let (rk, rt) = backward_recover(&p, &c, a, b).unwrap();
                if rk == k || rk.iter().zip(&k).all(|(x, y)| x ^ y == 0x80) {
                    continue;
                }
                let (e3, e5) = verify_candidate(&p, &c, &rk, &rt, 9);
                eq3 += u64::from(e3);
                eq5 += u64::from(e5);
                both += u64::from(e3 && e5);
                total += 1;
            }
        }
    }
    let f3 = eq3 as f64 / total as f64 * 256.0;
    let f5 = eq5 as f64 / total as f64 * 256.0;
    let fb = both as f64 / total as f64 * 65536.0;
    // the wrap-around check behaves like a uniform byte comparison
    assert!((0.5..2.0).contains(&f5), "eq5 rate {f5}/256");
    // the seed check is biased: wrong guesses that differ from the truth
    // only in high bit planes keep k(1) and t(1) consistent far more often
    assert!((4.0..64.0).contains(&f3), "eq3 rate {f3}/256");
    // the two checks are close to independent of each other
    assert!((0.5..2.0).contains(&(fb / (f3 * f5))), "joint {fb}/65536");
}

#[test]
fn kpa_one_reference_key_on_small_image() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let p = random_bytes(&mut rng, 1024);
    let key = SecretKey::reference();
    let k = keystream(&key, p.len()).unwrap();
    let c = encrypt(&p, &k, key.c0).unwrap();
    let report = kpa_one(
        &p,
        &c,
        &Kpa1Options {
            c0: Some(3),
            require_both: true,
        },
    )
    .unwrap();
    assert!(report.candidates.iter().any(|cand| cand.same_class(&k)));
    assert!(report
        .candidates
        .windows(2)
        .all(|w| (w[0].k_l1, w[0].k_l) < (w[1].k_l1, w[1].k_l)));
    for cand in &report.candidates {
        assert_eq!(cand.passed_eq3, Some(true));
        assert!(cand.passed_eq5);
        assert_eq!(cand.implied_c0, 3);
    }
}

#[test]
fn kpa_one_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p = random_bytes(&mut rng, 200);
    let k = random_bytes(&mut rng, 200);
    let c = encrypt(&p, &k, 77).unwrap();
    let strict = kpa_one(
        &p,
        &c,
        &Kpa1Options {
            c0: Some(77),
            require_both: true,
        },
    )
    .unwrap();
    let loose = kpa_one(
        &p,
        &c,
        &Kpa1Options {
            c0: Some(77),
            require_both: false,
        },
    )
    .unwrap();
    let secret = kpa_one(
        &p,
        &c,
        &Kpa1Options {
            c0: None,
            require_both: true,
        },
    )
    .unwrap();
    assert!(strict.candidates.len() <= loose.candidates.len());
    assert!(loose.candidates.iter().all(|c| c.passed_eq5));
    assert!(secret
        .candidates
        .iter()
        .all(|c| c.passed_eq3.is_none() && c.implied_c0 != 0));
    assert!(secret.candidates.iter().any(|cand| cand.same_class(&k)));
    // the sweep entry for the true c0 matches the known-c0 run
    let sweep = c0_sweep(&secret);
    assert_eq!(sweep.get(&77).copied().unwrap_or(0), strict.candidates.len());
    assert!(kpa_one(
        &p,
        &c,
        &Kpa1Options {
            c0: Some(0),
            require_both: true
        }
    )
    .is_err());
}

#[test]
fn kpa_one_work_scales_linearly() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let paper_unit = |n: usize| (256 * 128 * 2 * 3 * n) as f64;
    let mut ratios = Vec::new();
    for n in [64usize, 256, 1024] {
        let p = random_bytes(&mut rng, n);
        let k = random_bytes(&mut rng, n);
        let c = encrypt(&p, &k, 1).unwrap();
        let report = kpa_one(
            &p,
            &c,
            &Kpa1Options {
                c0: Some(1),
                require_both: true,
            },
        )
        .unwrap();
        assert_eq!(report.guesses_tested, GUESS_SPACE);
        ratios.push(report.work_ops as f64 / paper_unit(n));
    }
    for r in &ratios {
        assert!((0.5..=2.0).contains(r), "work ratio {r}");
    }
}

#[test]
fn kpa_two_recovers_random_keystreams() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for n in [5usize, 6, 16, 500] {
        for _ in 0..5 {
            let k = random_bytes(&mut rng, n);
            let c0 = rng.gen_range(1..=255);
            let p1 = random_bytes(&mut rng, n);
            let p2 = random_bytes(&mut rng, n);
            let c1 = encrypt(&p1, &k, c0).unwrap();
            let c2 = encrypt(&p2, &k, c0).unwrap();
            let report = kpa_two(&p1, &c1, &p2, &c2, &Kpa2Options::default()).unwrap();
            let hit = report.candidates.iter().find(|cand| cand.same_class(&k));
            let hit = hit.expect("true keystream class missing");
            assert_eq!(hit.implied_c0, c0);
            assert_eq!(hit.passed_eq3, None);
            let with_c0 = kpa_two(
                &p1,
                &c1,
                &p2,
                &c2,
                &Kpa2Options {
                    c0: Some(c0),
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(with_c0.candidates.iter().all(|c| c.passed_eq3 == Some(true)));
            assert!(with_c0.candidates.iter().any(|cand| cand.same_class(&k)));
        }
    }
}

#[test]
fn kpa_two_either_mode_is_superset() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let n = 12;
    let k = random_bytes(&mut rng, n);
    let (p1, p2) = (random_bytes(&mut rng, n), random_bytes(&mut rng, n));
    let (c1, c2) = (encrypt(&p1, &k, 5).unwrap(), encrypt(&p2, &k, 5).unwrap());
    let both = kpa_two(&p1, &c1, &p2, &c2, &Kpa2Options::default()).unwrap();
    let either = kpa_two(
        &p1,
        &c1,
        &p2,
        &c2,
        &Kpa2Options {
            final_check: FinalCheck::Either,
            c0: None,
        },
    )
    .unwrap();
    for cand in &both.candidates {
        assert!(either
            .candidates
            .iter()
            .any(|e| (e.k_l1, e.k_l) == (cand.k_l1, cand.k_l)));
    }
}

#[test]
fn kpa_two_work_is_near_constant_per_guess() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let n = 4096;
    let k = random_bytes(&mut rng, n);
    let (p1, p2) = (random_bytes(&mut rng, n), random_bytes(&mut rng, n));
    let (c1, c2) = (encrypt(&p1, &k, 5).unwrap(), encrypt(&p2, &k, 5).unwrap());
    let report = kpa_two(&p1, &c1, &p2, &c2, &Kpa2Options::default()).unwrap();
    assert_eq!(report.candidates.len(), 1);
    // 256 * 128 * 5 * (3*2 + 7), plus one full walk for each deep survivor
    let budget = 256 * 128 * 5 * 13 + 32 * 13 * n as u64;
    assert!(report.work_ops <= budget, "work {} > {budget}", report.work_ops);
}

#[test]
fn high_bit_variant_survives_chain_but_not_final_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let n = 64;
    let k = random_bytes(&mut rng, n);
    let (p1, p2) = (random_bytes(&mut rng, n), random_bytes(&mut rng, n));
    let (c1, c2) = (encrypt(&p1, &k, 5).unwrap(), encrypt(&p2, &k, 5).unwrap());
    let walks = chain_walks(&p1, &c1, &p2, &c2, &Kpa2Options::default()).unwrap();
    let (a, b) = if k[n - 1] < 128 {
        (k[n - 2], k[n - 1])
    } else {
        (k[n - 2] ^ 0x80, k[n - 1] ^ 0x80)
    };
    let truth = walks.iter().find(|w| (w.k_l1, w.k_l) == (a, b)).unwrap();
    assert!(truth.accepted);
    assert_eq!(truth.depth, n - 2);
    // flipping only the top bit of k(L-1) keeps every k(i-1) agreement
    let variant = walks.iter().find(|w| (w.k_l1, w.k_l) == (a ^ 0x80, b)).unwrap();
    assert_eq!(variant.depth, n - 2);
    assert!(!variant.accepted);
}

#[test]
fn report_config_and_schema() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let n = 32;
    let k = random_bytes(&mut rng, n);
    let (p1, p2) = (random_bytes(&mut rng, n), random_bytes(&mut rng, n));
    let (c1, c2) = (encrypt(&p1, &k, 5).unwrap(), encrypt(&p2, &k, 5).unwrap());
    let mut report = kpa_two(&p1, &c1, &p2, &c2, &Kpa2Options::default()).unwrap();
    let p3 = random_bytes(&mut rng, n);
    let c3 = encrypt(&p3, &k, 5).unwrap();
    report.score_against(&c3, &p3, None).unwrap();
    let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(v["attack"], "kpa2");
    assert_eq!(v["guesses_tested"], 32768);
    assert!(v["wall_time_ms"].is_number());
    let cand = &v["candidates"][0];
    for field in ["kL1", "kL", "passed_eq3", "passed_eq5", "implied_c0", "score"] {
        assert!(cand.get(field).is_some(), "missing {field}");
    }
    assert_eq!(cand["score"], 1.0);
}
