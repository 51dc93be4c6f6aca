//! The JSON files under `corpus/` must match the in-code builders.
//! Run with `FINSLER_BLESS=1` to regenerate them.

use std::path::PathBuf;

use finsler_cli::specfile;
use finsler_core::corpus;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn expected_files() -> Vec<(PathBuf, String)> {
    let dir = corpus_dir();
    let mut out: Vec<(PathBuf, String)> = corpus::bundled()
        .into_iter()
        .map(|e| (dir.join(format!("{}.json", e.name)), specfile::spec_to_json(&e.spec)))
        .collect();
    let tensor_json = |t| serde_json::to_string_pretty(&specfile::tensor_to_file(t)).unwrap() + "\n";
    let (g, a) = corpus::flat_construction_parts();
    out.push((dir.join("construct/flat_gamma.json"), specfile::spec_to_json(&g)));
    out.push((dir.join("construct/flat_alpha.json"), tensor_json(&a)));
    let (g, a) = corpus::product_construction_parts();
    out.push((dir.join("construct/product_gamma.json"), specfile::spec_to_json(&g)));
    out.push((dir.join("construct/product_alpha.json"), tensor_json(&a)));
    out.push((dir.join("perturbed_beltrami.json"), specfile::spec_to_json(&corpus::perturbed_beltrami(2, 0.01))));
    out
}

#[test]
fn corpus_files_match_builders() {
    let bless = std::env::var_os("FINSLER_BLESS").is_some();
    for (path, text) in expected_files() {
        if bless {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, &text).unwrap();
            continue;
        }
        let on_disk = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(on_disk, text, "{} is stale; rerun with FINSLER_BLESS=1", path.display());
    }
}

#[test]
fn corpus_files_parse() {
    for (path, _) in expected_files() {
        if path.to_string_lossy().contains("alpha") {
            specfile::parse_tensor(&path).unwrap();
        } else {
            specfile::parse_spec(&path).unwrap();
        }
    }
}
