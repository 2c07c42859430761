//! Train on pairs where 30% of the articles were swapped and watch the
//! refurbished labels separate clean pairs from corrupted ones.

use claimmatch::encoder::{EncoderConfig, EncoderModel, Side, Vocab};
use claimmatch::retrieval::FieldCombo;
use claimmatch::synthetic::noisy_pairs;
use claimmatch::textnorm::NormConfig;
use claimmatch::training::{train, TrainConfig, TrainPair};

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn main() -> claimmatch::Result<()> {
    for seed in 0..3u64 {
        let data = noisy_pairs(40, 10, 0.3, seed);
        let vocab = Vocab::build(data.tweets.iter().chain(&data.articles), 1, 256)?;
        let enc = EncoderConfig { seed, ..EncoderConfig::default() };
        let model = EncoderModel::init(vocab, FieldCombo::Cts, enc, &NormConfig::default())?;
        let pairs: Vec<TrainPair> = data
            .tweets
            .iter()
            .zip(&data.articles)
            .map(|(t, a)| TrainPair {
                tweet: model.tweet_input(t),
                article: model.segments_input(&[a], Side::Article),
                label: 1.0,
            })
            .collect();
        let cfg = TrainConfig { epochs: 20, seed, ..TrainConfig::default() };
        let state = train(model, &pairs, &cfg, None)?;
        let labels = |clean: bool| {
            mean(state.labels.iter().zip(&data.clean).filter(|(_, c)| **c == clean).map(|(y, _)| *y))
        };
        println!(
            "seed {seed}: mean label clean {:.3}, corrupted {:.3}, gap {:.3}, tau {:.3}",
            labels(true),
            labels(false),
            labels(true) - labels(false),
            state.tau
        );
        for h in state.history.iter().step_by(5) {
            println!("  epoch {:>2} loss {:.4} mean label {:.3}", h.epoch, h.mean_loss, h.mean_label);
        }
    }
    Ok(())
}
