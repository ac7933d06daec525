//! Conformance corpus for the TextGrid reader and writer.
//!
//! `tests/textgrid/valid/*.TextGrid` each come with a `.json` file holding
//! the expected structure; `tests/textgrid/malformed/expected.json` gives
//! the error line and a message fragment for every malformed file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use rhotic_core::segmentation::{parse_textgrid, serialize_textgrid, TextGrid};
use serde::Deserialize;

fn corpus_dir(sub: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/textgrid").join(sub)
}

fn files_with_ext(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some(ext))
        .collect();
    v.sort();
    v
}

#[derive(Deserialize)]
struct ExpInterval {
    xmin: f64,
    xmax: f64,
    text: String,
}

#[derive(Deserialize)]
struct ExpTier {
    name: String,
    xmin: f64,
    xmax: f64,
    intervals: Vec<ExpInterval>,
}

#[derive(Deserialize)]
struct Expected {
    xmin: f64,
    xmax: f64,
    tiers: Vec<ExpTier>,
    skipped: Vec<String>,
}

fn assert_matches(grid: &TextGrid, exp: &Expected, what: &str) {
    assert_eq!((grid.xmin, grid.xmax), (exp.xmin, exp.xmax), "{what}: grid bounds");
    assert_eq!(grid.tiers.len(), exp.tiers.len(), "{what}: tier count");
    for (t, e) in grid.tiers.iter().zip(&exp.tiers) {
        assert_eq!(t.name, e.name, "{what}");
        assert_eq!((t.xmin, t.xmax), (e.xmin, e.xmax), "{what}: tier {}", e.name);
        assert_eq!(t.intervals.len(), e.intervals.len(), "{what}: tier {}", e.name);
        for (i, ei) in t.intervals.iter().zip(&e.intervals) {
            assert_eq!((i.xmin, i.xmax), (ei.xmin, ei.xmax), "{what}: tier {}", e.name);
            assert_eq!(i.text, ei.text, "{what}: tier {}", e.name);
        }
    }
    let skipped: Vec<&str> = grid.skipped_tiers.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(skipped, exp.skipped, "{what}: skipped tiers");
}

#[test]
fn valid_corpus_parses_to_expected_structure_and_round_trips() {
    let files = files_with_ext(&corpus_dir("valid"), "TextGrid");
    assert_eq!(files.len(), 25);
    for f in &files {
        let what = f.file_name().unwrap().to_string_lossy();
        let text = std::fs::read_to_string(f).unwrap();
        let grid = parse_textgrid(&text).unwrap_or_else(|e| panic!("{what}: {e}"));
        let exp: Expected = serde_json::from_str(&std::fs::read_to_string(f.with_extension("json")).unwrap()).unwrap();
        assert_matches(&grid, &exp, &what);

        let written = serialize_textgrid(&grid);
        let again = parse_textgrid(&written).unwrap_or_else(|e| panic!("{what} rewritten: {e}"));
        assert!(grid.same_structure(&again), "{what}: round trip changed the structure");
        assert!(again.skipped_tiers.is_empty());
        assert_eq!(serialize_textgrid(&again), written, "{what}: writer is not a fixed point");
    }
}

#[derive(Deserialize)]
struct ExpectedError {
    line: usize,
    contains: String,
}

#[test]
fn malformed_files_report_positions() {
    let dir = corpus_dir("malformed");
    let expected: BTreeMap<String, ExpectedError> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("expected.json")).unwrap()).unwrap();
    let files = files_with_ext(&dir, "TextGrid");
    assert_eq!(files.len(), expected.len());
    assert!(files.len() >= 20);
    for f in &files {
        let stem = f.file_stem().unwrap().to_string_lossy().into_owned();
        let exp = &expected[&stem];
        let text = std::fs::read_to_string(f).unwrap();
        let err = parse_textgrid(&text).expect_err(&stem);
        assert_eq!(err.line, exp.line, "{stem}: {err}");
        assert!(err.message.contains(&exp.contains), "{stem}: '{}' lacks '{}'", err.message, exp.contains);
    }
}

fn valid_texts() -> Vec<String> {
    files_with_ext(&corpus_dir("valid"), "TextGrid")
        .iter()
        .map(|f| std::fs::read_to_string(f).unwrap())
        .collect()
}

fn line_count(text: &str) -> usize {
    text.split('\n').count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn truncation_never_panics(file in 0usize..25, frac in 0.0f64..1.0) {
        let texts = valid_texts();
        let text = &texts[file];
        let mut cut = (text.len() as f64 * frac) as usize;
        while !text.is_char_boundary(cut) {
            cut -= 1;
        }
        if let Err(e) = parse_textgrid(&text[..cut]) {
            prop_assert!(e.line >= 1 && e.line <= line_count(text));
        }
    }

    #[test]
    fn line_edits_never_panic(file in 0usize..25, line in 0usize..200, junk in "[ -~]{0,20}") {
        let texts = valid_texts();
        let mut lines: Vec<&str> = texts[file].split('\n').collect();
        let i = line % lines.len();
        lines[i] = &junk;
        let text = lines.join("\n");
        if let Err(e) = parse_textgrid(&text) {
            prop_assert!(e.line >= 1 && e.line <= line_count(&text));
        }
    }
}
