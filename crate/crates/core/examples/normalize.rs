//! Normalize a few tweets and show what each step keeps.

use claimmatch::textnorm::{normalize, stem, NormConfig};

const TWEETS: &[&str] = &[
    "@CDCgov Vaccines contain MICROCHIPS!!! https://t.co/abc123 #plandemic",
    "Biden won 81,000,000 votes? No way. RT if you agree",
    "They're spraying chemtrails over Ohio again... wake up people",
    "5G towers caused the outbreak <3 #5GKills",
];

fn main() {
    let cfg = NormConfig::default();
    let mut raw = NormConfig::default();
    raw.stem = false;
    for t in TWEETS {
        println!("{t}");
        println!("  unstemmed: {}", normalize(t, &raw).join(" "));
        println!("  stemmed:   {}", normalize(t, &cfg).join(" "));
    }
    for w in ["running", "conspiracies", "vaccinated", "generalization"] {
        println!("{w} -> {}", stem(w));
    }
}
