//! Helpers shared by integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

pub fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden").join(name)
}

/// Compares `actual` with the stored golden file, rewriting it instead when
/// `UPDATE_GOLDEN` is set.
pub fn assert_golden(name: &str, actual: &[u8]) {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, actual).expect("failed to update golden file");
        return;
    }
    let expected =
        fs::read(&path).unwrap_or_else(|e| panic!("failed to load golden file {}: {e}", path.display()));
    if actual != expected.as_slice() {
        let shown = |b: &[u8]| String::from_utf8_lossy(&b[..b.len().min(400)]).into_owned();
        panic!(
            "golden file mismatch: {name} ({} vs {} bytes)\nexpected: {}\nactual:   {}",
            expected.len(),
            actual.len(),
            shown(&expected),
            shown(actual)
        );
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
