//! `ipvault`: keystore, envelope and white-box workflows from the shell.

mod commands;
mod error;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use error::{CliError, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "ipvault", version, about = "Protected-IP envelopes and white-box RSA key extraction")]
pub struct Cli {
    /// Keystore directory.
    #[arg(long, global = true, env = "IPVAULT_STORE", default_value = "ipvault-store")]
    pub store: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an RSA key pair into the keystore.
    Keygen(KeygenArgs),
    /// Build a white-box decryptor for a stored private key.
    Wbgen(WbgenArgs),
    /// Encrypt a file into an envelope for one or more recipients.
    Encrypt(EncryptArgs),
    /// Decrypt an envelope with a plain key or a white-box.
    Decrypt(DecryptArgs),
    /// Check every tool block's digest without decrypting the data.
    Verify(VerifyArgs),
    /// Extract the private key from a white-box file.
    Attack(AttackArgs),
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    #[arg(long)]
    pub keyname: String,
    #[arg(long, default_value_t = 1024)]
    pub bits: u64,
    /// Public exponent, decimal.
    #[arg(long, default_value_t = 65537)]
    pub e: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Enforce the 2048-bit floor.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    Splitkey,
    Obfcrt,
    Window,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Splitkey => "splitkey",
            Scheme::Obfcrt => "obfcrt",
            Scheme::Window => "window",
        }
    }
}

#[derive(Debug, Args)]
pub struct WbgenArgs {
    #[arg(long, value_enum)]
    pub scheme: Scheme,
    #[arg(long)]
    pub keyname: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the generator secrets next to the output (window only).
    #[arg(long)]
    pub emit_secrets: bool,
    /// Also write an unrelated plaintext decoy key next to the output
    /// (splitkey only).
    #[arg(long)]
    pub emit_decoy: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    #[value(name = "aes128-cbc")]
    Aes128Cbc,
    #[value(name = "aes256-cbc")]
    Aes256Cbc,
}

#[derive(Debug, Args)]
pub struct EncryptArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Recipient as `keyname` or `keyname:Key Owner`. Repeatable.
    #[arg(long = "recipient", required = true)]
    pub recipients: Vec<String>,
    /// Common right `name=value`. Repeatable.
    #[arg(long = "right")]
    pub rights: Vec<String>,
    /// Per-recipient right `keyname:name=value`. Repeatable.
    #[arg(long = "tool-right")]
    pub tool_rights: Vec<String>,
    #[arg(long, value_enum, default_value = "aes256-cbc")]
    pub data_method: Method,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Require 2048-bit recipient keys.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("decryptor").required(true).args(["keyname", "key", "wb"])))]
pub struct KeySource {
    /// Use the stored private key of this keyname.
    #[arg(long)]
    pub keyname: Option<String>,
    /// Use a private key file.
    #[arg(long)]
    pub key: Option<PathBuf>,
    /// Use a white-box file of any scheme.
    #[arg(long)]
    pub wb: Option<PathBuf>,
    /// Tool block to open; defaults to the keyname of the key source.
    #[arg(long = "as")]
    pub as_keyname: Option<String>,
}

#[derive(Debug, Args)]
pub struct DecryptArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub source: KeySource,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub source: KeySource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttackMethodArg {
    Auto,
    ChosenCiphertext,
    Matrix,
    Miller,
    Gcd,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("exponent").required(true).args(["e", "public"])))]
pub struct AttackArgs {
    /// Expected scheme; must match the file.
    #[arg(long, value_enum)]
    pub scheme: Option<Scheme>,
    #[arg(long)]
    pub wb: PathBuf,
    /// Public exponent, decimal.
    #[arg(long)]
    pub e: Option<u64>,
    /// Public key file; its modulus must match the white-box.
    #[arg(long = "pub")]
    pub public: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: AttackMethodArg,
    /// Write the attack report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Only check the structure of the white-box (window scheme).
    #[arg(long)]
    pub verify_only: bool,
    /// Write the recovered private key file here.
    #[arg(long)]
    pub key_out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = err.print();
            return ExitCode::from(code as u8);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("ipvault: {err}");
            ExitCode::from(CliError::exit_code(&err) as u8)
        }
    }
}
