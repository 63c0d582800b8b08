#![allow(dead_code)]

use datquant_cli::{cmd_phantom, PhantomCounts, RunConfig};
use std::path::PathBuf;

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub config: RunConfig,
}

impl Fixture {
    pub fn root(&self) -> PathBuf {
        self.dir.path().join("phantom")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root().join("manifest.csv")
    }

    pub fn sbr(&self) -> PathBuf {
        self.root().join("sbr.csv")
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

/// Small phantom study written to a temporary directory.
pub fn phantom(normal: usize, swedd: usize, pd: usize, seed: u64) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        seed: Some(seed),
        ..RunConfig::default()
    };
    cmd_phantom(&dir.path().join("phantom"), PhantomCounts { normal, swedd, pd }, true, &cfg).unwrap();
    let config = RunConfig::load(&dir.path().join("phantom/run.toml")).unwrap();
    Fixture { dir, config }
}
