#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use narrlab_service::config::LabConfig;
use narrlab_service::run::RunDir;
use narrlab_service::stages::{self, ORDER};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn small_config() -> LabConfig {
    LabConfig::load(&fixture("small.json")).unwrap()
}

/// Runs every stage of the small config into `root/id`.
pub fn build_run(root: &Path, id: &str, cfg: LabConfig) -> RunDir {
    let mut run = RunDir::open_or_create(root, id, Some(cfg)).unwrap();
    for stage in ORDER {
        stages::run_stage(&mut run, stage).unwrap_or_else(|e| panic!("{stage}: {e}"));
    }
    run
}

/// One completed run shared by every test in the binary.
pub fn shared_run() -> &'static Path {
    static ROOT: OnceLock<tempfile::TempDir> = OnceLock::new();
    ROOT.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        build_run(dir.path(), "base", small_config());
        dir
    })
    .path()
}
