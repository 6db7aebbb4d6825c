//! On-disk keystore: `<root>/<keyname>.key` and `<root>/<keyname>.pub`.

use std::fs;
use std::path::{Path, PathBuf};

use ipvault::keyfile::{parse_private_key, parse_public_key, write_private_key, write_public_key};
use ipvault::text::is_valid_keyname;
use ipvault::{RsaPrivateKey, RsaPublicKey};

use crate::error::CliError;

pub struct Keystore {
    root: PathBuf,
}

impl Keystore {
    pub fn open(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn path(&self, keyname: &str, ext: &str) -> Result<PathBuf, CliError> {
        if !is_valid_keyname(keyname) {
            return Err(CliError::Usage(format!("invalid keyname `{keyname}`")));
        }
        Ok(self.root.join(format!("{keyname}.{ext}")))
    }

    pub fn contains(&self, keyname: &str) -> Result<bool, CliError> {
        Ok(self.path(keyname, "key")?.exists() || self.path(keyname, "pub")?.exists())
    }

    /// Refuses to overwrite an existing keyname.
    pub fn insert(&self, keyname: &str, key: &RsaPrivateKey) -> Result<(), CliError> {
        if self.contains(keyname)? {
            return Err(CliError::Exists(keyname.to_owned()));
        }
        fs::create_dir_all(&self.root).map_err(|e| CliError::io(&self.root, e))?;
        write_new(&self.path(keyname, "key")?, &write_private_key(keyname, key))?;
        write_new(&self.path(keyname, "pub")?, &write_public_key(keyname, &key.public_key()))
    }

    pub fn private_key(&self, keyname: &str) -> Result<RsaPrivateKey, CliError> {
        let path = self.path(keyname, "key")?;
        let (name, key) = parse_private_key(&read_text(&path)?).map_err(|e| CliError::file(&path, e))?;
        check_name(&path, keyname, &name)?;
        Ok(key)
    }

    pub fn public_key(&self, keyname: &str) -> Result<RsaPublicKey, CliError> {
        let path = self.path(keyname, "pub")?;
        let (name, key) = parse_public_key(&read_text(&path)?).map_err(|e| CliError::file(&path, e))?;
        check_name(&path, keyname, &name)?;
        Ok(key)
    }
}

fn check_name(path: &Path, want: &str, found: &str) -> Result<(), CliError> {
    if want != found {
        return Err(CliError::file(
            path,
            ipvault::Error::Parse {
                line: 1,
                msg: format!("file holds keyname `{found}`, expected `{want}`"),
            },
        ));
    }
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn write_new(path: &Path, contents: &str) -> Result<(), CliError> {
    use std::io::Write;
    let mut f = fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(path)
        .map_err(|e| CliError::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| CliError::io(path, e))
}
