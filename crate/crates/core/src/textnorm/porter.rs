//! The original Porter (1980) suffix-stripping stemmer.
//!
//! Rule lists are applied first-match-wins in the published order: when a
//! suffix matches but its condition fails, the step stops without trying
//! the remaining rules of that step.

type Condition = fn(&[u8]) -> bool;

struct Rule {
    suffix: &'static str,
    replacement: &'static str,
    condition: Condition,
}

const fn rule(suffix: &'static str, replacement: &'static str, condition: Condition) -> Rule {
    Rule {
        suffix,
        replacement,
        condition,
    }
}

fn always(_: &[u8]) -> bool {
    true
}

fn m_gt0(stem: &[u8]) -> bool {
    measure(stem) > 0
}

fn m_gt1(stem: &[u8]) -> bool {
    measure(stem) > 1
}

fn m_gt1_st(stem: &[u8]) -> bool {
    measure(stem) > 1 && matches!(stem.last(), Some(b's') | Some(b't'))
}

const STEP1A: &[Rule] = &[
    rule("sses", "ss", always),
    rule("ies", "i", always),
    rule("ss", "ss", always),
    rule("s", "", always),
];

const STEP2: &[Rule] = &[
    rule("ational", "ate", m_gt0),
    rule("tional", "tion", m_gt0),
    rule("enci", "ence", m_gt0),
    rule("anci", "ance", m_gt0),
    rule("izer", "ize", m_gt0),
    rule("abli", "able", m_gt0),
    rule("alli", "al", m_gt0),
    rule("entli", "ent", m_gt0),
    rule("eli", "e", m_gt0),
    rule("ousli", "ous", m_gt0),
    rule("ization", "ize", m_gt0),
    rule("ation", "ate", m_gt0),
    rule("ator", "ate", m_gt0),
    rule("alism", "al", m_gt0),
    rule("iveness", "ive", m_gt0),
    rule("fulness", "ful", m_gt0),
    rule("ousness", "ous", m_gt0),
    rule("aliti", "al", m_gt0),
    rule("iviti", "ive", m_gt0),
    rule("biliti", "ble", m_gt0),
];

const STEP3: &[Rule] = &[
    rule("icate", "ic", m_gt0),
    rule("ative", "", m_gt0),
    rule("alize", "al", m_gt0),
    rule("iciti", "ic", m_gt0),
    rule("ical", "ic", m_gt0),
    rule("ful", "", m_gt0),
    rule("ness", "", m_gt0),
];

const STEP4: &[Rule] = &[
    rule("al", "", m_gt1),
    rule("ance", "", m_gt1),
    rule("ence", "", m_gt1),
    rule("er", "", m_gt1),
    rule("ic", "", m_gt1),
    rule("able", "", m_gt1),
    rule("ible", "", m_gt1),
    rule("ant", "", m_gt1),
    rule("ement", "", m_gt1),
    rule("ment", "", m_gt1),
    rule("ent", "", m_gt1),
    rule("ion", "", m_gt1_st),
    rule("ou", "", m_gt1),
    rule("ism", "", m_gt1),
    rule("ate", "", m_gt1),
    rule("iti", "", m_gt1),
    rule("ous", "", m_gt1),
    rule("ive", "", m_gt1),
    rule("ize", "", m_gt1),
];

fn is_vowel_letter(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

/// `y` is a consonant at the start of a word or after a vowel, a vowel
/// after a consonant.
fn is_consonant(word: &[u8], mut i: usize) -> bool {
    if is_vowel_letter(word[i]) {
        return false;
    }
    if word[i] != b'y' {
        return true;
    }
    let mut negate = false;
    while i > 0 && word[i] == b'y' {
        negate = !negate;
        i -= 1;
    }
    (!is_vowel_letter(word[i])) != negate
}

/// Number of VC sequences in `[C](VC)^m[V]`.
fn measure(stem: &[u8]) -> usize {
    let mut m = 0;
    let mut prev_vowel = false;
    for i in 0..stem.len() {
        let cons = is_consonant(stem, i);
        if cons && prev_vowel {
            m += 1;
        }
        prev_vowel = !cons;
    }
    m
}

fn contains_vowel(stem: &[u8]) -> bool {
    (0..stem.len()).any(|i| !is_consonant(stem, i))
}

fn ends_double_consonant(word: &[u8]) -> bool {
    let n = word.len();
    n >= 2 && word[n - 1] == word[n - 2] && is_consonant(word, n - 1)
}

/// `*o`: the stem ends consonant-vowel-consonant and the last letter is not w, x or y.
fn ends_cvc(word: &[u8]) -> bool {
    let n = word.len();
    n >= 3
        && is_consonant(word, n - 3)
        && !is_consonant(word, n - 2)
        && is_consonant(word, n - 1)
        && !matches!(word[n - 1], b'w' | b'x' | b'y')
}

fn apply_rules(word: Vec<u8>, rules: &[Rule]) -> Vec<u8> {
    for r in rules {
        if word.ends_with(r.suffix.as_bytes()) {
            let stem = &word[..word.len() - r.suffix.len()];
            if (r.condition)(stem) {
                let mut out = stem.to_vec();
                out.extend_from_slice(r.replacement.as_bytes());
                return out;
            }
            return word;
        }
    }
    word
}

fn step1b(word: Vec<u8>) -> Vec<u8> {
    if word.ends_with(b"eed") {
        let stem = &word[..word.len() - 3];
        if measure(stem) > 0 {
            let mut out = stem.to_vec();
            out.extend_from_slice(b"ee");
            return out;
        }
        return word;
    }
    let mut stem = None;
    for suffix in [&b"ed"[..], &b"ing"[..]] {
        if word.ends_with(suffix) {
            let candidate = &word[..word.len() - suffix.len()];
            if contains_vowel(candidate) {
                stem = Some(candidate.to_vec());
                break;
            }
        }
    }
    let Some(mut stem) = stem else {
        return word;
    };
    for (suffix, repl) in [("at", "ate"), ("bl", "ble"), ("iz", "ize")] {
        if stem.ends_with(suffix.as_bytes()) {
            stem.truncate(stem.len() - suffix.len());
            stem.extend_from_slice(repl.as_bytes());
            return stem;
        }
    }
    if ends_double_consonant(&stem) {
        if !matches!(stem[stem.len() - 1], b'l' | b's' | b'z') {
            stem.pop();
        }
        return stem;
    }
    if measure(&stem) == 1 && ends_cvc(&stem) {
        stem.push(b'e');
    }
    stem
}

fn step1c(mut word: Vec<u8>) -> Vec<u8> {
    if word.last() == Some(&b'y') && contains_vowel(&word[..word.len() - 1]) {
        let n = word.len();
        word[n - 1] = b'i';
    }
    word
}

fn step5a(mut word: Vec<u8>) -> Vec<u8> {
    if word.last() == Some(&b'e') {
        let stem = &word[..word.len() - 1];
        let m = measure(stem);
        if m > 1 || (m == 1 && !ends_cvc(stem)) {
            word.pop();
        }
    }
    word
}

fn step5b(mut word: Vec<u8>) -> Vec<u8> {
    if word.ends_with(b"ll") && measure(&word[..word.len() - 1]) > 1 {
        word.pop();
    }
    word
}

/// Stem one lowercase token.
///
/// Non-ASCII tokens are returned unchanged. ASCII digits and symbols are
/// treated as consonants.
pub fn stem(token: &str) -> String {
    if token.is_empty() || !token.is_ascii() {
        return token.to_string();
    }
    let mut w = token.as_bytes().to_vec();
    w = apply_rules(w, STEP1A);
    w = step1b(w);
    w = step1c(w);
    w = apply_rules(w, STEP2);
    w = apply_rules(w, STEP3);
    w = apply_rules(w, STEP4);
    w = step5a(w);
    w = step5b(w);
    String::from_utf8(w).expect("ascii in, ascii out")
}
