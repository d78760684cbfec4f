//! CSV formatting, content hashes and all-or-nothing file writes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::learner::LearningRecord;
use crate::source::BathParams;

pub const LEARNING_HEADER: &str =
    "iter,gamma,delta,gamma_norm,delta_norm,dist_norm,x_bar,p_e_model,overlap,w_avg_scaled,df_scaled,q_scaled";

/// Fixed 17-significant-digit representation; round-trips every `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn learning_csv(records: &[LearningRecord]) -> String {
    let mut out = String::with_capacity(64 + records.len() * 220);
    out.push_str(LEARNING_HEADER);
    out.push('\n');
    for r in records {
        let fields = [
            r.f.gamma,
            r.f.delta,
            r.f_normalized[0],
            r.f_normalized[1],
            r.dist_norm,
            r.x_bar,
            r.p_e_model,
            r.gamma_overlap,
            r.thermo.w_avg_scaled,
            r.thermo.df_scaled,
            r.thermo.q_scaled,
        ];
        write!(out, "{}", r.iteration).unwrap();
        for x in fields {
            out.push(',');
            out.push_str(&format_float(x));
        }
        out.push('\n');
    }
    out
}

/// `"inf"` for zero temperature, otherwise the shortest decimal form.
pub fn mu_label(bath: BathParams) -> String {
    if bath.is_zero_temperature() {
        "inf".to_string()
    } else {
        format!("{}", bath.mu())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A file written under a temporary name, moved into place by [`commit`].
#[derive(Debug)]
pub struct StagedFile {
    tmp: PathBuf,
    dest: PathBuf,
}

impl StagedFile {
    pub fn dest(&self) -> &Path {
        &self.dest
    }
}

pub fn stage(dir: &Path, name: &str, bytes: &[u8]) -> Result<StagedFile> {
    let dest = dir.join(name);
    let tmp = dir.join(format!(".{name}.partial-{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    Ok(StagedFile { tmp, dest })
}

/// Rename every staged file into place.
pub fn commit(files: Vec<StagedFile>) -> Result<Vec<PathBuf>> {
    let mut done = Vec::with_capacity(files.len());
    for f in files {
        fs::rename(&f.tmp, &f.dest)?;
        done.push(f.dest);
    }
    Ok(done)
}

/// Remove staged files after a failure.
pub fn discard(files: Vec<StagedFile>) {
    for f in files {
        let _ = fs::remove_file(f.tmp);
    }
}

/// Stage all `(name, bytes)` pairs and commit them only if every write
/// succeeds.
pub fn write_all(dir: &Path, items: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut staged = Vec::with_capacity(items.len());
    for (name, bytes) in items {
        match stage(dir, name, bytes) {
            Ok(s) => staged.push(s),
            Err(e) => {
                discard(staged);
                return Err(e);
            }
        }
    }
    commit(staged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789, 0.0, f64::MIN_POSITIVE] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn hash_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn writes_are_all_or_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let items = vec![("a.csv".to_string(), b"x".to_vec()), ("b.csv".to_string(), b"y".to_vec())];
        let paths = write_all(dir.path(), &items).unwrap();
        assert_eq!(paths.len(), 2);
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 2);
        // a name that cannot be created aborts the batch without leftovers
        let bad = vec![("c.csv".to_string(), b"z".to_vec()), ("no/such/dir.csv".to_string(), b"w".to_vec())];
        assert!(write_all(dir.path(), &bad).is_err());
        assert!(!dir.path().join("c.csv").exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
    }

    #[test]
    fn mu_labels() {
        assert_eq!(mu_label(BathParams::zero_temperature()), "inf");
        assert_eq!(mu_label(BathParams::new(2.0).unwrap()), "2");
        assert_eq!(mu_label(BathParams::new(0.5).unwrap()), "0.5");
    }
}
