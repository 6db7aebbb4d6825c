//! Acceptance gate. Runs every criterion, prints one `[PASS]`/`[FAIL]`
//! line each and exits nonzero if any failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use ipvault::envelope::{
    decrypt_ip, encrypt_ip, parse, serialize, unwrap_session_key, verify_digest, CommonBlock, DataMethod, Recipient,
    Right,
};
use ipvault::numtheory::random::{random_below, random_range};
use ipvault::numtheory::{gcd, gen_rsa_keypair, miller_factor_bounded, mod_pow};
use ipvault::whitebox::obfcrt::{exponent_gcd, gen_obfcrt, obf_crt_exp, obf_mod_unreduced};
use ipvault::whitebox::splitkey::{gen_splitkey, splitkey_decrypt};
use ipvault::whitebox::window::{
    attack_chosen_ciphertext, attack_matrix, build_m, gen_window, am_structure, window_decrypt, WindowWhiteBox,
};
use ipvault::whitebox::{attack, AttackMethod, RecoveredKey, WhiteBox};
use ipvault::{Nat, RsaPrivateKey};
use num_traits::{One, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

const KEYS: usize = 100;
const BITS: u64 = 512;

fn e() -> Nat {
    Nat::from(65537u32)
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn key_pool(seed: u64) -> Vec<RsaPrivateKey> {
    let mut r = rng(seed);
    (0..KEYS).map(|_| gen_rsa_keypair(BITS, &e(), &mut r).unwrap()).collect()
}

type Outcome = Result<String, String>;

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn scheme_equivalence() -> Outcome {
    let start = Instant::now();
    let keys = key_pool(1);
    let mut r = rng(101);
    let mut mismatches = 0usize;
    let mut evaluations = 0usize;
    for key in &keys {
        let sk = gen_splitkey("k", key, &mut r).map_err(|e| e.to_string())?;
        let oc = gen_obfcrt("k", key, &mut r).map_err(|e| e.to_string())?;
        let (wn, _) = gen_window("k", key, &mut r).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let c = random_below(&mut r, &key.n);
            let want = mod_pow(&c, &key.d, &key.n).unwrap();
            for got in [splitkey_decrypt(&sk, &c), obf_crt_exp(&oc, &c), window_decrypt(&wn, &c)] {
                evaluations += 1;
                if got.ok().as_ref() != Some(&want) {
                    mismatches += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    check(mismatches == 0, || format!("{mismatches} mismatches of {evaluations}"))?;
    check(elapsed < Duration::from_secs(60), || format!("took {elapsed:.1?}, limit 60s"))?;
    Ok(format!("{evaluations} evaluations, 0 mismatches, {elapsed:.1?}"))
}

fn miller() -> Outcome {
    let keys = key_pool(2);
    let mut r = rng(202);
    let mut failures = Vec::new();
    let mut total_bases = 0usize;
    let mut worst = 0usize;
    for (i, key) in keys.iter().enumerate() {
        let k = random_range(&mut r, &Nat::one(), &(Nat::one() << 64u32));
        let shifted = &key.d + k * &key.phi;
        for (label, d) in [("d", &key.d), ("d+kΦ", &shifted)] {
            match miller_factor_bounded(&key.n, &key.e, d, &mut r, 8) {
                Ok((f, used)) if f.same_as(&key.p, &key.q) => {
                    total_bases += used;
                    worst = worst.max(used);
                }
                Ok(_) => failures.push(format!("key {i} ({label}): wrong factors")),
                Err(e) => failures.push(format!("key {i} ({label}): {e}")),
            }
        }
    }
    check(failures.is_empty(), || failures.join("; "))?;
    Ok(format!(
        "{} runs, mean {:.2} bases, max {worst}",
        2 * KEYS,
        total_bases as f64 / (2 * KEYS) as f64
    ))
}

fn gcd_recovery() -> Outcome {
    let keys = key_pool(3);
    let mut r = rng(303);
    for (i, key) in keys.iter().enumerate() {
        let wb = gen_obfcrt("k", key, &mut r).map_err(|e| e.to_string())?;
        let n = &key.n;
        let gamma = wb.gamma();
        let (p, q) = (&key.p, &key.q);
        check(gcd(&(&gamma - 1u8), n) == *p, || format!("instance {i}: gcd(γ-1, N) != p"))?;
        check(gcd(&gamma, n) == *q, || format!("instance {i}: gcd(γ, N) != q"))?;
        check(gcd(&(&wb.p1 - &wb.p2), n) == *p, || format!("instance {i}: gcd(N, p1-p2) != p"))?;
        check(gcd(&(&wb.q1 - &wb.q2), n) == *q, || format!("instance {i}: gcd(N, q1-q2) != q"))?;
        let dp = &wb.dp1 + &wb.dp2;
        let dq = &wb.dq1 + &wb.dq2;
        let m = random_range(&mut r, &Nat::from(2u8), n);
        check(exponent_gcd(&m, &key.e, &dp, n).unwrap() == *p, || {
            format!("instance {i}: gcd(N, c^dp - m) != p")
        })?;
        check(exponent_gcd(&m, &key.e, &dq, n).unwrap() == *q, || {
            format!("instance {i}: gcd(N, c^dq - m) != q")
        })?;
    }
    Ok(format!("{KEYS}/{KEYS} instances exact (c = m^e)"))
}

type WindowAttack = fn(&WindowWhiteBox, &Nat, &mut ChaCha20Rng) -> ipvault::Result<RecoveredKey>;

fn window_structure_and_attacks() -> Outcome {
    let keys = key_pool(4);
    let mut r = rng(404);
    let mut slowest = Duration::ZERO;
    for (i, key) in keys.iter().enumerate() {
        let (wb, sec) = gen_window("k", key, &mut r).map_err(|e| e.to_string())?;
        let am = wb.a.mul(&build_m(&wb.alpha, &wb.beta, &key.n)).unwrap();
        for row in 0..32 {
            let nonzero: Vec<usize> = (0..32).filter(|&j| !am.get(row, j).is_zero()).collect();
            check(nonzero == [sec.pi[row]], || format!("instance {i}: row {row} nonzeros at {nonzero:?}"))?;
            check(am.get(row, sec.pi[row]) == &sec.rvec[sec.pi[row]], || {
                format!("instance {i}: row {row} entry is not r_π(i)")
            })?;
            check(am.get(row, 32) == &wb.tprime[row], || format!("instance {i}: row {row} column 32 != t'"))?;
        }
        check(am_structure(&wb).is_ok(), || format!("instance {i}: structure check rejected"))?;
        let attacks: [(&str, WindowAttack); 2] = [
            ("chosen-ciphertext", attack_chosen_ciphertext),
            ("matrix", attack_matrix),
        ];
        for (name, run) in attacks {
            let start = Instant::now();
            let rec = run(&wb, &key.e, &mut r).map_err(|e| format!("instance {i}: {name}: {e}"))?;
            let took = start.elapsed();
            slowest = slowest.max(took);
            check(took < Duration::from_secs(1), || format!("instance {i}: {name} took {took:.1?}"))?;
            check(rec.pi.as_ref() == Some(&sec.pi), || format!("instance {i}: {name} π differs"))?;
            check(rec.rvec.as_ref() == Some(&sec.rvec), || format!("instance {i}: {name} rvec differs"))?;
            check(rec.d == sec.d, || format!("instance {i}: {name} d differs"))?;
        }
    }
    Ok(format!("{KEYS}/{KEYS} exact, slowest attack {slowest:.1?}"))
}

fn obf_mod_property() -> Outcome {
    let keys = key_pool(5);
    let mut r = rng(505);
    let mut done = 0;
    for key in keys.iter().take(10) {
        let wb = gen_obfcrt("k", key, &mut r).map_err(|e| e.to_string())?;
        let n2 = &key.n * &key.n;
        for (s1, s2) in [(&wb.p1, &wb.p2), (&wb.q1, &wb.q2)] {
            let tilde = s1 - s2;
            for _ in 0..50 {
                let a = random_below(&mut r, &n2);
                let out = obf_mod_unreduced(&a, s1, s2).unwrap();
                check(&out % &tilde == &a % &tilde, || format!("residue changed for a = {a:x}"))?;
                done += 1;
            }
        }
    }
    check(done == 1000, || format!("only {done} inputs"))?;
    Ok(format!("{done}/1000 inputs preserved mod p1-p2"))
}

fn envelope_properties() -> Outcome {
    let keys = key_pool(6);
    let mut r = rng(606);
    let recipients: Vec<Recipient> = keys[..5]
        .iter()
        .enumerate()
        .map(|(i, k)| Recipient {
            keyowner: format!("Vendor {i}"),
            keyname: format!("v{i}"),
            public_key: k.public_key(),
            rights: vec![Right::new("simulate", "on").unwrap()],
        })
        .collect();
    let common = CommonBlock {
        rights: vec![Right::new("license", "site").unwrap()],
    };

    let mut round_trips = 0;
    for (i, size) in [1usize, 100, 4096, 65_537, 1 << 20].into_iter().enumerate() {
        let count = i + 1;
        let mut pt = vec![0u8; size];
        r.fill_bytes(&mut pt);
        let env = encrypt_ip(&pt, &common, &recipients[..count], DataMethod::Aes128Cbc, &mut r)
            .map_err(|e| e.to_string())?;
        let env = parse(&serialize(&env)).map_err(|e| e.to_string())?;
        for (j, k) in keys[..count].iter().enumerate() {
            let out = decrypt_ip(&env, k, &format!("v{j}")).map_err(|e| e.to_string())?;
            check(out.plaintext == pt, || format!("{size} B, recipient {j}: plaintext differs"))?;
            round_trips += 1;
        }
    }

    let env = encrypt_ip(&[0x42u8; 1000], &common, &recipients[..3], DataMethod::Aes256Cbc, &mut r).unwrap();
    let bytes = serialize(&env);
    let text = std::str::from_utf8(&bytes).unwrap();
    let sessions: Vec<_> = (0..3).map(|i| unwrap_session_key(&env.tools[i], &keys[i]).unwrap()).collect();

    // Header bytes: every line from the first `control` through the last
    // tool header line, excluding digest/key base64 blocks.
    let mut header_tampers = 0;
    let mut offset = 0;
    let mut in_b64 = false;
    for line in text.split_inclusive('\n') {
        let body = line.strip_prefix("`pragma protect ");
        in_b64 = match body {
            Some(b) => {
                let header = b.starts_with("control ") || b.starts_with("key_key") || b.starts_with("key_method");
                if header {
                    for at in (offset..offset + line.len() - 1).flat_map(|at| [at; 4]) {
                        let mut bad = bytes.clone();
                        bad[at] = loop {
                            let v = r.gen_range(0x20u8..0x7f);
                            if v != bad[at] {
                                break v;
                            }
                        };
                        if let Ok(tampered) = parse(&bad) {
                            // the tampered line belongs to the common block or one tool;
                            // at least one tool's digest must fail, and any tool whose
                            // covered bytes changed must fail
                            let changed: Vec<usize> = (0..3)
                                .filter(|&t| tampered.common != env.common || tampered.tools[t] != env.tools[t])
                                .collect();
                            check(!changed.is_empty(), || format!("byte {at}: tamper parsed to the same envelope"))?;
                            for t in changed {
                                check(!verify_digest(&sessions[t], &tampered.common, &tampered.tools[t]), || {
                                    format!("byte {at}: tool {t} digest still verifies")
                                })?;
                            }
                            header_tampers += 1;
                        }
                    }
                }
                matches!(b.trim_end(), "digest_block" | "key_block" | "data_block")
            }
            None => in_b64,
        };
        offset += line.len();
    }
    check(header_tampers > 100, || format!("only {header_tampers} header tampers parsed"))?;

    for at in 0..env.data.payload.len() {
        let mut bad = env.clone();
        bad.data.payload[at] ^= 0x80;
        for t in 0..3 {
            check(verify_digest(&sessions[t], &bad.common, &bad.tools[t]), || {
                format!("data byte {at} flipped tool {t}'s digest")
            })?;
        }
    }

    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden.env");
    let golden = std::fs::read(&fixture).map_err(|e| format!("{}: {e}", fixture.display()))?;
    let reparsed = parse(&golden).map_err(|e| e.to_string())?;
    check(serialize(&reparsed) == golden, || "golden fixture did not re-serialize byte-identically".into())?;

    Ok(format!(
        "{round_trips} round trips, {header_tampers} header tampers detected, {} data tampers undetected, golden identical",
        env.data.payload.len()
    ))
}

fn end_to_end() -> Outcome {
    let mut r = rng(707);
    let key = gen_rsa_keypair(BITS, &e(), &mut r).unwrap();
    let probe = b"probe envelope payload".to_vec();
    let recipient = Recipient {
        keyowner: "Victim Tools".into(),
        keyname: "victim".into(),
        public_key: key.public_key(),
        rights: vec![],
    };
    let env = encrypt_ip(&probe, &CommonBlock::default(), &[recipient], DataMethod::Aes128Cbc, &mut r).unwrap();
    let whiteboxes = [
        WhiteBox::SplitKey(gen_splitkey("victim", &key, &mut r).unwrap()),
        WhiteBox::ObfCrt(gen_obfcrt("victim", &key, &mut r).unwrap()),
        WhiteBox::Window(gen_window("victim", &key, &mut r).unwrap().0),
    ];
    let mut broken = Vec::new();
    for wb in &whiteboxes {
        // the attacker sees only the white-box file and the public exponent
        let wb = WhiteBox::parse(&wb.to_text()).unwrap();
        let (_, rec) = attack(&wb, AttackMethod::Auto, &e(), &mut r).map_err(|e| format!("{}: {e}", wb.scheme()))?;
        let stolen = rec.to_private_key(&e()).map_err(|e| e.to_string())?;
        let out = decrypt_ip(&env, &stolen, "victim").map_err(|e| format!("{}: {e}", wb.scheme()))?;
        check(out.plaintext == probe, || format!("{}: wrong plaintext", wb.scheme()))?;
        broken.push(wb.scheme());
    }
    Ok(format!("3/3 schemes broken ({})", broken.join(", ")))
}

fn key_space_and_binomial() -> Outcome {
    let fact: Nat = (1..=32u32).map(Nat::from).product();
    check(fact > Nat::one() << 117u32, || "32! <= 2^117".into())?;
    let mut r = rng(808);
    for i in 0..100 {
        let bits = r.gen_range(2u64..=512);
        let n = random_below(&mut r, &(Nat::one() << bits)) + 2u8;
        let alpha = random_below(&mut r, &n);
        let beta = random_below(&mut r, &n);
        let c = random_below(&mut r, &n);
        let m = build_m(&alpha, &beta, &n);
        let powers: Vec<Nat> = (0..33u32).map(|k| mod_pow(&c, &Nat::from(k), &n).unwrap()).collect();
        let x = (&alpha * &c + &beta) % &n;
        let s: Vec<Nat> = (0..33u32).map(|k| mod_pow(&x, &Nat::from(k), &n).unwrap()).collect();
        check(m.mul_vec(&powers).unwrap() == s, || format!("instance {i}: M·c-powers != s"))?;
    }
    Ok("32! > 2^117 exactly; 100/100 binomial instances".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("scheme equivalence", scheme_equivalence),
        ("miller factorization", miller),
        ("gcd recovery", gcd_recovery),
        ("window structure and attacks", window_structure_and_attacks),
        ("obf-mod residue", obf_mod_property),
        ("envelope properties", envelope_properties),
        ("end-to-end break", end_to_end),
        ("key space and binomial identity", key_space_and_binomial),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("[PASS] {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
