use std::path::Path;
use std::time::Instant;

use ipvault::envelope::{
    decrypt_ip, encrypt_ip, parse, serialize, unwrap_session_key, verify_digest, CommonBlock, DataMethod, Recipient,
    Right,
};
use ipvault::keyfile::{parse_private_key, parse_public_key, write_private_key};
use ipvault::numtheory::random::random_range;
use ipvault::numtheory::{gen_rsa_keypair, RsaDecryptor, MIN_KEY_BITS};
use ipvault::text::to_hex;
use ipvault::whitebox::obfcrt::gen_obfcrt;
use ipvault::whitebox::splitkey::gen_splitkey;
use ipvault::whitebox::window::{gen_window, am_structure};
use ipvault::whitebox::{attack, AttackMethod, WhiteBox};
use ipvault::{Error, Nat, RsaPrivateKey, RsaPublicKey};
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::store::{read_bytes, read_text, write, Keystore};
use crate::{
    AttackArgs, AttackMethodArg, Cli, Command, DecryptArgs, EncryptArgs, KeySource, KeygenArgs, Method, Scheme,
    VerifyArgs, WbgenArgs,
};

const STRICT_MIN_BITS: u64 = 2048;
const PROBE: &[u8] = b"ipvault probe envelope";

pub fn run(cli: Cli) -> Result<(), CliError> {
    let store = Keystore::open(&cli.store);
    match cli.command {
        Command::Keygen(args) => keygen(&store, args),
        Command::Wbgen(args) => wbgen(&store, args),
        Command::Encrypt(args) => encrypt(&store, args),
        Command::Decrypt(args) => decrypt(&store, args),
        Command::Verify(args) => verify(&store, args),
        Command::Attack(args) => attack_cmd(args),
    }
}

fn rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

/// First 16 hex digits of SHA-256 over the canonical hex modulus.
pub fn fingerprint(n: &Nat) -> String {
    Sha256::digest(to_hex(n).as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn keygen(store: &Keystore, args: KeygenArgs) -> Result<(), CliError> {
    if args.bits < MIN_KEY_BITS {
        return Err(CliError::Usage(format!("--bits must be at least {MIN_KEY_BITS}")));
    }
    if args.strict && args.bits < STRICT_MIN_BITS {
        return Err(CliError::Usage(format!("--strict requires --bits of at least {STRICT_MIN_BITS}")));
    }
    if args.e < 3 || args.e.is_multiple_of(2) {
        return Err(CliError::Usage("--e must be odd and at least 3".into()));
    }
    if store.contains(&args.keyname)? {
        return Err(CliError::Exists(args.keyname));
    }
    let key = gen_rsa_keypair(args.bits, &Nat::from(args.e), &mut rng(args.seed))?;
    store.insert(&args.keyname, &key)?;
    println!("keyname={}", args.keyname);
    println!("fingerprint={}", fingerprint(&key.n));
    Ok(())
}

fn wbgen(store: &Keystore, args: WbgenArgs) -> Result<(), CliError> {
    if args.emit_secrets && args.scheme != Scheme::Window {
        return Err(CliError::Usage("--emit-secrets applies to the window scheme only".into()));
    }
    if args.emit_decoy && args.scheme != Scheme::Splitkey {
        return Err(CliError::Usage("--emit-decoy applies to the splitkey scheme only".into()));
    }
    let key = store.private_key(&args.keyname)?;
    let mut rng = rng(args.seed);
    let name = &args.keyname;
    let text = match args.scheme {
        Scheme::Splitkey => {
            let wb = gen_splitkey(name, &key, &mut rng)?;
            if args.emit_decoy {
                // same keyname and size, unrelated to the real key
                let decoy = gen_rsa_keypair(key.n.bits(), &key.e, &mut rng)?;
                write(&args.out.with_extension("decoy"), write_private_key(name, &decoy))?;
            }
            wb.to_text()
        }
        Scheme::Obfcrt => gen_obfcrt(name, &key, &mut rng)?.to_text(),
        Scheme::Window => {
            let (wb, secrets) = gen_window(name, &key, &mut rng)?;
            if args.emit_secrets {
                write(&args.out.with_extension("secrets"), secrets.to_text(name))?;
            }
            wb.to_text()
        }
    };
    write(&args.out, text)?;
    println!("scheme={}", args.scheme.name());
    println!("keyname={name}");
    Ok(())
}

fn parse_right(spec: &str) -> Result<Right, CliError> {
    let (name, value) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("right `{spec}` is not name=value")))?;
    Right::new(name, value).map_err(|e| CliError::Usage(e.to_string()))
}

fn encrypt(store: &Keystore, args: EncryptArgs) -> Result<(), CliError> {
    let common = CommonBlock {
        rights: args.rights.iter().map(|r| parse_right(r)).collect::<Result<_, _>>()?,
    };
    let mut recipients = Vec::with_capacity(args.recipients.len());
    for spec in &args.recipients {
        let (keyname, owner) = spec.split_once(':').unwrap_or((spec, spec));
        let public_key = store.public_key(keyname)?;
        if args.strict && public_key.n.bits() < STRICT_MIN_BITS {
            return Err(CliError::Usage(format!(
                "--strict: key `{keyname}` is below {STRICT_MIN_BITS} bits"
            )));
        }
        recipients.push(Recipient {
            keyowner: owner.to_owned(),
            keyname: keyname.to_owned(),
            public_key,
            rights: Vec::new(),
        });
    }
    for spec in &args.tool_rights {
        let (keyname, right) = spec
            .split_once(':')
            .ok_or_else(|| CliError::Usage(format!("tool right `{spec}` is not keyname:name=value")))?;
        let r = recipients
            .iter_mut()
            .find(|r| r.keyname == keyname)
            .ok_or_else(|| CliError::Usage(format!("tool right for `{keyname}`, which is not a recipient")))?;
        r.rights.push(parse_right(right)?);
    }
    let method = match args.data_method {
        Method::Aes128Cbc => DataMethod::Aes128Cbc,
        Method::Aes256Cbc => DataMethod::Aes256Cbc,
    };
    let plaintext = read_bytes(&args.input)?;
    let env = encrypt_ip(&plaintext, &common, &recipients, method, &mut rng(args.seed))?;
    write(&args.out, serialize(&env))
}

/// The decryptor named on the command line and the tool block it opens.
fn load_source(store: &Keystore, src: &KeySource) -> Result<(Box<dyn RsaDecryptor>, String), CliError> {
    let (dec, name): (Box<dyn RsaDecryptor>, String) = if let Some(name) = &src.keyname {
        (Box::new(store.private_key(name)?), name.clone())
    } else if let Some(path) = &src.key {
        let (name, key) = parse_private_key(&read_text(path)?).map_err(|e| CliError::file(path, e))?;
        (Box::new(key), name)
    } else if let Some(path) = &src.wb {
        let wb = WhiteBox::parse(&read_text(path)?).map_err(|e| CliError::file(path, e))?;
        let name = wb.keyname().to_owned();
        (Box::new(wb), name)
    } else {
        return Err(CliError::Usage("one of --keyname, --key or --wb is required".into()));
    };
    Ok((dec, src.as_keyname.clone().unwrap_or(name)))
}

fn read_envelope(path: &Path) -> Result<ipvault::envelope::DigitalEnvelope, CliError> {
    parse(&read_bytes(path)?).map_err(|e| CliError::file(path, e))
}

fn decrypt(store: &Keystore, args: DecryptArgs) -> Result<(), CliError> {
    let env = read_envelope(&args.input)?;
    let (dec, keyname) = load_source(store, &args.source)?;
    let out = decrypt_ip(&env, dec.as_ref(), &keyname)?;
    write(&args.out, &out.plaintext)?;
    for r in &out.common.rights {
        println!("common.{}={}", r.name, r.value);
    }
    for r in &out.tool_rights {
        println!("tool.{}={}", r.name, r.value);
    }
    Ok(())
}

fn verify(store: &Keystore, args: VerifyArgs) -> Result<(), CliError> {
    let env = read_envelope(&args.input)?;
    let (dec, keyname) = load_source(store, &args.source)?;
    let own = env
        .tool(&keyname)
        .ok_or_else(|| Error::NoSuchToolBlock(keyname.clone()))?;
    // every block wraps the same session key, so one unwrap checks them all
    let session = unwrap_session_key(own, dec.as_ref())?;
    let mut failed = Vec::new();
    for tool in &env.tools {
        let ok = verify_digest(&session, &env.common, tool);
        println!("digest.{}={}", tool.keyname, if ok { "pass" } else { "fail" });
        if !ok {
            failed.push(tool.keyname.clone());
        }
    }
    if !failed.is_empty() {
        return Err(Error::DigestMismatch {
            keyname: failed.join(","),
        }
        .into());
    }
    Ok(())
}

fn method_of(arg: AttackMethodArg) -> AttackMethod {
    match arg {
        AttackMethodArg::Auto => AttackMethod::Auto,
        AttackMethodArg::ChosenCiphertext => AttackMethod::ChosenCiphertext,
        AttackMethodArg::Matrix => AttackMethod::Matrix,
        AttackMethodArg::Miller => AttackMethod::Miller,
        AttackMethodArg::Gcd => AttackMethod::Gcd,
    }
}

/// Decrypts a fresh probe with the recovered key: an envelope when the
/// modulus can wrap a session key, a raw RSA block otherwise.
fn probe(public: &RsaPublicKey, stolen: &RsaPrivateKey, rng: &mut ChaCha20Rng) -> Result<bool, CliError> {
    if public.size() >= DataMethod::Aes128Cbc.key_len() + ipvault::envelope::pkcs1::PKCS1_OVERHEAD {
        let recipient = Recipient {
            keyowner: "probe".into(),
            keyname: "probe".into(),
            public_key: public.clone(),
            rights: Vec::new(),
        };
        let env = encrypt_ip(PROBE, &CommonBlock::default(), &[recipient], DataMethod::Aes128Cbc, rng)?;
        Ok(decrypt_ip(&env, stolen, "probe").is_ok_and(|d| d.plaintext == PROBE))
    } else {
        let m = random_range(rng, &Nat::from(2u8), &public.n);
        let c = public.encrypt_raw(&m)?;
        Ok(stolen.decrypt_raw(&c)? == m)
    }
}

fn attack_cmd(args: AttackArgs) -> Result<(), CliError> {
    let wb = WhiteBox::parse(&read_text(&args.wb)?).map_err(|e| CliError::file(&args.wb, e))?;
    if let Some(s) = args.scheme {
        if s.name() != wb.scheme() {
            return Err(CliError::Usage(format!("--scheme {} but the file holds {}", s.name(), wb.scheme())));
        }
    }
    let requested = method_of(args.method);
    let method = requested.resolve(wb.scheme()).ok_or_else(|| {
        CliError::Usage(format!("method {} does not apply to scheme {}", requested.token(), wb.scheme()))
    })?;
    let n = wb.modulus().clone();
    let e = match (&args.e, &args.public) {
        (Some(e), _) => Nat::from(*e),
        (None, Some(path)) => {
            let (_, public) = parse_public_key(&read_text(path)?).map_err(|e| CliError::file(path, e))?;
            if public.n != n {
                return Err(CliError::file(path, Error::Domain("public modulus does not match the white-box".into())));
            }
            public.e
        }
        (None, None) => return Err(CliError::Usage("one of --e or --pub is required".into())),
    };
    let public = RsaPublicKey::new(n.clone(), e.clone())?;

    if args.verify_only {
        let WhiteBox::Window(w) = &wb else {
            return Err(CliError::Usage("--verify-only applies to the window scheme only".into()));
        };
        am_structure(w)?;
        println!("scheme={}", wb.scheme());
        println!("keyname={}", wb.keyname());
        println!("verdict=A·M structure:true");
        return Ok(());
    }

    let mut rng = rng(args.seed);
    let start = Instant::now();
    let (_, rec) = attack(&wb, method, &e, &mut rng)?;
    let wall_ms = start.elapsed().as_millis();
    let stolen = rec.to_private_key(&e)?;

    let mut verdicts = rec.verdicts(&n, &e);
    verdicts.push(("probe decrypts", probe(&public, &stolen, &mut rng)?));

    let mut report = String::new();
    let mut line = |k: &str, v: &str| {
        report.push_str(k);
        report.push('=');
        report.push_str(v);
        report.push('\n');
    };
    line("scheme", wb.scheme());
    line("keyname", wb.keyname());
    line("method", method.token());
    line("d", &to_hex(&rec.d));
    line("p", &to_hex(&rec.factors.p));
    line("q", &to_hex(&rec.factors.q));
    line("wall_ms", &wall_ms.to_string());
    for (name, ok) in &verdicts {
        line("verdict", &format!("{name}:{ok}"));
    }
    print!("{report}");
    if let Some(path) = &args.report {
        write(path, &report)?;
    }
    if let Some((name, _)) = verdicts.iter().find(|(_, ok)| !ok) {
        return Err(CliError::Verdict((*name).to_owned()));
    }
    if let Some(path) = &args.key_out {
        write(path, write_private_key(wb.keyname(), &stolen))?;
    }
    Ok(())
}
