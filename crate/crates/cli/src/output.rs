//! Output directory with atomic file writes and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Collects files written into one directory. Each file is first written
/// under a temporary name and renamed into place, so a failed command
/// never leaves a truncated file behind.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<(String, u64)>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let target = self.dir.join(name);
        let mut tmp = tempfile::Builder::new()
            .prefix(&format!(".{name}."))
            .tempfile_in(&self.dir)
            .map_err(|e| CliError::io(&target, e))?;
        tmp.write_all(contents).map_err(|e| CliError::io(&target, e))?;
        tmp.as_file().sync_all().map_err(|e| CliError::io(&target, e))?;
        tmp.persist(&target).map_err(|e| CliError::io(&target, e.error))?;
        self.files.retain(|(n, _)| n != name);
        self.files.push((name.to_string(), contents.len() as u64));
        Ok(())
    }

    pub fn files(&self) -> &[(String, u64)] {
        &self.files
    }
}

/// Structured-text manifest in the same `[section]` / `key = value` layout
/// as the configuration.
#[derive(Debug, Default)]
pub struct Manifest {
    pub command: String,
    pub config_echo: String,
    pub mesh_stats: Vec<(String, String)>,
    pub timings: Vec<(String, f64)>,
}

impl Manifest {
    pub fn render(&self, files: &[(String, u64)]) -> String {
        let mut s = String::new();
        s.push_str(&format!("# {} manifest\n\n", self.command));
        s.push_str(&self.config_echo);
        s.push_str("\n[mesh_stats]\n");
        for (k, v) in &self.mesh_stats {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push_str("\n[timing_seconds]\n");
        for (k, v) in &self.timings {
            s.push_str(&format!("{k} = {v:.6}\n"));
        }
        s.push_str("\n[files]\n");
        for (name, size) in files {
            s.push_str(&format!("{name} = {size}\n"));
        }
        s
    }

    /// Writes `manifest.txt` listing every other file already written.
    pub fn write(&self, out: &mut OutputDir) -> Result<(), CliError> {
        let text = self.render(out.files());
        out.write("manifest.txt", text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_land_atomically_and_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(&dir.path().join("nested")).unwrap();
        out.write("a.txt", b"hello").unwrap();
        out.write("a.txt", b"hello again").unwrap();
        assert_eq!(out.files(), &[("a.txt".to_string(), 11)]);
        let names: Vec<_> = fs::read_dir(out.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("a.txt")]);
        let m = Manifest {
            command: "run".into(),
            ..Manifest::default()
        };
        m.write(&mut out).unwrap();
        let text = fs::read_to_string(out.path().join("manifest.txt")).unwrap();
        assert!(text.contains("a.txt = 11"));
    }
}
