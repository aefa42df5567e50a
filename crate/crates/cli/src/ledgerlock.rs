//! Advisory file locking for ledger files: one process owns one ledger.

use anyhow::{bail, Context, Result};
use std::fs::File;
use std::os::fd::AsRawFd;
use std::path::Path;

/// Exclusive advisory lock on a ledger file, released when dropped (or when
/// the process exits, whichever comes first).
pub struct LedgerLock {
    _file: File,
}

impl LedgerLock {
    pub fn acquire(path: &Path) -> Result<Self> {
        let file =
            File::open(path).with_context(|| format!("cannot open ledger {}", path.display()))?;
        let rc = unsafe { libc::flock(file.as_raw_fd(), libc::LOCK_EX | libc::LOCK_NB) };
        if rc != 0 {
            let err = std::io::Error::last_os_error();
            if err.raw_os_error() == Some(libc::EWOULDBLOCK) {
                bail!("ledger {} is locked by another process", path.display());
            }
            return Err(err).with_context(|| format!("cannot lock ledger {}", path.display()));
        }
        Ok(Self { _file: file })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn lock_is_exclusive_within_a_process_via_separate_fds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.txt");
        let mut f = File::create(&path).unwrap();
        writeln!(f, "x").unwrap();
        let first = LedgerLock::acquire(&path).unwrap();
        // flock locks are per open-file-description; a second descriptor in
        // the same process must be refused too
        assert!(LedgerLock::acquire(&path).is_err());
        drop(first);
        assert!(LedgerLock::acquire(&path).is_ok());
    }
}
