use proptest::prelude::*;
use resumeflow_core::ingest::normalize_text;
use unicode_normalization::UnicodeNormalization;

fn non_ws_nfc(s: &str) -> Vec<char> {
    let mut v: Vec<char> = s.nfc().filter(|c| !c.is_whitespace()).collect();
    v.sort_unstable();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn idempotent(s in "(\\PC|[\\r\\n \\t]){0,80}") {
        let once = normalize_text(&s);
        prop_assert_eq!(normalize_text(&once), once);
    }

    #[test]
    fn preserves_non_whitespace(s in "([a-zé\\u{301}ñ.,]|[\\r\\n \\t]){0,80}") {
        prop_assert_eq!(non_ws_nfc(&normalize_text(&s)), non_ws_nfc(&s));
    }

    #[test]
    fn blank_runs_bounded(s in "(x|\\n| ){0,60}") {
        let out = normalize_text(&s);
        prop_assert!(!out.contains("\n\n\n"));
        prop_assert!(!out.lines().any(|l| l.ends_with(' ')));
    }
}

#[test]
fn examples() {
    assert_eq!(normalize_text("a\r\nb"), "a\nb");
    assert_eq!(normalize_text("a\n\n\n\n\nb"), "a\n\nb");
}
