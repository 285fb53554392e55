//! The reply corpus under fixtures/replies and a byte-string fuzzer.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use delf_core::parser::{classify, extract_code_blocks, parse_design_reply, select_candidate, ParseError, RefusalLexicon, ReplyKind};
use proptest::prelude::Rng;
use proptest::test_runner::{RngAlgorithm, TestRng};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
pub struct Expectation {
    pub kind: ReplyKind,
    #[serde(default)]
    pub observation: Vec<String>,
    #[serde(default)]
    pub action: Vec<String>,
    #[serde(default)]
    pub blocks: Option<usize>,
    #[serde(default)]
    pub tag: Option<String>,
    #[serde(default)]
    pub error_line: Option<usize>,
}

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/replies")
}

pub fn load_expectations() -> BTreeMap<String, Expectation> {
    let text = fs::read_to_string(corpus_dir().join("expected.json")).expect("corpus manifest");
    serde_json::from_str(&text).expect("valid corpus manifest")
}

/// Checks one fixture; `Err` describes the mismatch.
pub fn check_fixture(file: &str, exp: &Expectation) -> Result<(), String> {
    let text = fs::read_to_string(corpus_dir().join(file)).map_err(|e| format!("{file}: {e}"))?;
    let got = classify(&text, &RefusalLexicon::default());
    if got != exp.kind {
        return Err(format!("{file}: classified {got:?}, expected {:?}", exp.kind));
    }
    match exp.kind {
        ReplyKind::Design => {
            let pair = parse_design_reply(&text).map_err(|e| format!("{file}: {e}"))?;
            let names = |c: &delf_core::DesignChoice| c.attributes.iter().map(|a| a.name.clone()).collect::<Vec<_>>();
            if names(&pair.observation) != exp.observation || names(&pair.action) != exp.action {
                return Err(format!("{file}: attributes {:?} / {:?}", names(&pair.observation), names(&pair.action)));
            }
        }
        ReplyKind::Code => {
            let blocks = extract_code_blocks(&text);
            if Some(blocks.len()) != exp.blocks {
                return Err(format!("{file}: {} blocks", blocks.len()));
            }
            let chosen = select_candidate(&blocks).ok_or(format!("{file}: no candidate"))?;
            if Some(&chosen.language_tag) != exp.tag.as_ref() {
                return Err(format!("{file}: chose block tagged {:?}", chosen.language_tag));
            }
            if chosen.source.contains('\r') {
                return Err(format!("{file}: carriage return survived"));
            }
        }
        ReplyKind::Refusal | ReplyKind::Malformed => {}
    }
    if let Some(line) = exp.error_line {
        match parse_design_reply(&text) {
            Err(ParseError::MalformedDesign { line: got, .. }) if got == line => {}
            other => return Err(format!("{file}: expected an error on line {line}, got {other:?}")),
        }
    }
    Ok(())
}

const TOKENS: &[&[u8]] = &[
    b"```", b"```python\n", b"\n", b"\r\n", b"|", b"OBSERVATION:", b"ACTION:", b"discrete{", b"continuous[",
    b"}", b"]", b"^", b",", b"-", b"1e308", b"NaN", b"x", b"I cannot", "\u{00e9}".as_bytes(), b"\xff\xfe",
];

/// Runs the parser entry points over `count` pseudo-random byte strings;
/// returns how many inputs panicked.
pub fn fuzz(count: usize, seed: u8) -> usize {
    let mut rng = TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]);
    let lexicon = RefusalLexicon::default();
    let mut faults = 0;
    let mut buf = Vec::new();
    for _ in 0..count {
        buf.clear();
        let pieces = rng.next_u32() % 24;
        for _ in 0..pieces {
            if rng.next_u32().is_multiple_of(2) {
                buf.extend_from_slice(TOKENS[(rng.next_u32() as usize) % TOKENS.len()]);
            } else {
                let mut chunk = [0u8; 6];
                rng.fill_bytes(&mut chunk);
                buf.extend_from_slice(&chunk[..(rng.next_u32() % 7) as usize]);
            }
        }
        let text = String::from_utf8_lossy(&buf);
        let ok = std::panic::catch_unwind(|| {
            let _ = classify(&text, &lexicon);
            let _ = parse_design_reply(&text);
            let blocks = extract_code_blocks(&text);
            let _ = select_candidate(&blocks);
        })
        .is_ok();
        if !ok {
            faults += 1;
        }
    }
    faults
}
