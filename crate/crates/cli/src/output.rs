use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const SUCCESS_MARKER: &str = "_SUCCESS";

/// Result directory assembled next to its destination and moved into place
/// on [`AtomicDir::commit`]; dropped without committing, it is removed.
pub struct AtomicDir {
    tmp: PathBuf,
    dest: PathBuf,
    committed: bool,
}

impl AtomicDir {
    pub fn create(dest: &Path) -> Result<Self, CliError> {
        let name = dest.file_name().and_then(|n| n.to_str()).ok_or_else(|| CliError::Io(format!("bad output path {}", dest.display())))?;
        let parent = dest.parent().unwrap_or(Path::new("."));
        std::fs::create_dir_all(parent)?;
        let tmp = parent.join(format!(".{name}.partial"));
        if tmp.exists() {
            std::fs::remove_dir_all(&tmp)?;
        }
        std::fs::create_dir_all(&tmp)?;
        Ok(Self { tmp, dest: dest.to_path_buf(), committed: false })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.tmp.join(rel)
    }

    pub fn subdir(&self, rel: &str) -> Result<PathBuf, CliError> {
        let p = self.tmp.join(rel);
        std::fs::create_dir_all(&p)?;
        Ok(p)
    }

    pub fn write(&self, rel: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        std::fs::write(self.tmp.join(rel), contents)?;
        Ok(())
    }

    /// Writes the success marker and replaces any previous result.
    pub fn commit(mut self) -> Result<PathBuf, CliError> {
        std::fs::write(self.tmp.join(SUCCESS_MARKER), "")?;
        if self.dest.exists() {
            std::fs::remove_dir_all(&self.dest)?;
        }
        std::fs::rename(&self.tmp, &self.dest)?;
        self.committed = true;
        Ok(self.dest.clone())
    }
}

impl Drop for AtomicDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = std::fs::remove_dir_all(&self.tmp);
        }
    }
}

/// `v` rounded to `digits` significant digits, printed in its shortest
/// exact form.
pub fn fmt_sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { v.to_string() };
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), v).parse().expect("formatted float parses");
    rounded.to_string()
}
