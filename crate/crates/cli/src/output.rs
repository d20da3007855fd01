use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Output files collected in memory and published together. Nothing touches
/// the output directory until [`Staged::commit`], which writes every file
/// under a temporary name and then renames them into place. Any failure
/// removes whatever this commit created.
#[derive(Debug, Default)]
pub struct Staged {
    files: Vec<(String, Vec<u8>)>,
}

impl Staged {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let created_dir = !dir.exists();
        let fail = |what: &str, path: &Path, e: std::io::Error| {
            CliError::Runtime(format!("{what} {}: {e}", path.display()))
        };
        fs::create_dir_all(dir).map_err(|e| fail("cannot create", dir, e))?;

        let mut temps: Vec<(PathBuf, PathBuf)> = Vec::new();
        let mut published: Vec<PathBuf> = Vec::new();
        let cleanup = |temps: &[(PathBuf, PathBuf)], published: &[PathBuf]| {
            for (tmp, _) in temps {
                let _ = fs::remove_file(tmp);
            }
            for p in published {
                let _ = fs::remove_file(p);
            }
            if created_dir {
                let _ = fs::remove_dir(dir);
            }
        };

        for (name, bytes) in &self.files {
            let target = dir.join(name);
            let tmp = dir.join(format!(".{name}.partial-{}", std::process::id()));
            if let Err(e) = fs::write(&tmp, bytes) {
                let _ = fs::remove_file(&tmp);
                cleanup(&temps, &published);
                return Err(fail("cannot write", &tmp, e));
            }
            temps.push((tmp, target));
        }
        for i in 0..temps.len() {
            let (tmp, target) = &temps[i];
            if let Err(e) = fs::rename(tmp, target) {
                cleanup(&temps[i..], &published);
                return Err(fail("cannot publish", target, e));
            }
            published.push(target.clone());
        }
        Ok(published)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_publishes_everything() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let mut s = Staged::new();
        s.add("a.csv", b"x\n".to_vec());
        s.add("b.json", b"{}".to_vec());
        s.commit(&out).unwrap();
        assert_eq!(fs::read(out.join("a.csv")).unwrap(), b"x\n");
        assert_eq!(fs::read_dir(&out).unwrap().count(), 2);
    }

    #[test]
    fn failed_rename_rolls_back() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("b.json")).unwrap();
        let mut s = Staged::new();
        s.add("a.csv", b"x\n".to_vec());
        s.add("b.json", b"{}".to_vec());
        s.add("c.csv", b"y\n".to_vec());
        assert!(s.commit(dir.path()).is_err());
        let left: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(left, vec!["b.json".to_string()]);
    }

    #[test]
    fn unreachable_directory_creates_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, b"").unwrap();
        let mut s = Staged::new();
        s.add("a.csv", Vec::new());
        assert!(s.commit(&file.join("out")).is_err());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
