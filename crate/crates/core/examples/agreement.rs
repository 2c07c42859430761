//! Agreement between annotators: Fleiss' kappa over all raters and Cohen's
//! kappa per pair, on a small hand-made table and on random raters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use claimmatch::evalmetrics::{cohen_kappa, fleiss_kappa, rating_counts};

fn main() -> claimmatch::Result<()> {
    // items × raters, 1 = the tweet matches the article
    let labels = vec![
        vec![1, 1, 1],
        vec![0, 0, 0],
        vec![1, 1, 0],
        vec![1, 1, 1],
        vec![0, 0, 1],
        vec![0, 0, 0],
        vec![1, 1, 1],
        vec![1, 0, 1],
    ];
    println!("fleiss {:.4}", fleiss_kappa(&rating_counts(&labels))?);
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let x: Vec<i32> = labels.iter().map(|r| r[a]).collect();
        let y: Vec<i32> = labels.iter().map(|r| r[b]).collect();
        println!("cohen raters {}-{}: {:.4}", a + 1, b + 1, cohen_kappa(&x, &y)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let random: Vec<Vec<u8>> = (0..1000).map(|_| (0..3).map(|_| rng.gen_range(0..2)).collect()).collect();
    println!("independent raters: fleiss {:.4}", fleiss_kappa(&rating_counts(&random))?);
    Ok(())
}
