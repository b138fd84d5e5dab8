//! How the diversity and representativeness rewards score different
//! selections of the same synthetic video.

use vsumm::rewards::{total_reward, RewardConfig};
use vsumm::synthgen::make_clustered_video;

fn main() {
    let video = make_clustered_video(3, 8, 6, 0.05, 1);
    let x = video.features.view();
    let steps = video.n_steps();
    let keys = video.keyframe_indices.clone().unwrap();

    let mask =
        |picked: &[usize]| -> Vec<bool> { (0..steps).map(|t| picked.contains(&t)).collect() };
    let candidates: Vec<(&str, Vec<bool>)> = vec![
        ("cluster medoids", mask(&keys)),
        ("first three frames", mask(&[0, 1, 2])),
        ("every frame", vec![true; steps]),
        ("one frame", mask(&[keys[1]])),
        ("nothing", vec![false; steps]),
    ];

    println!(
        "{:<20} {:>7} {:>7} {:>7}",
        "selection", "R_div", "R_rep", "total"
    );
    for (name, actions) in &candidates {
        let r = total_reward(x, actions, &RewardConfig::default());
        println!(
            "{name:<20} {:>7.4} {:>7.4} {:>7.4}",
            r.r_div, r.r_rep, r.total
        );
    }

    // the temporal window treats far-apart frames as fully dissimilar
    let near_and_far = mask(&[0, 1, 22, 23]);
    for lambda in [Some(0), Some(5), Some(20), None] {
        let r = total_reward(
            x,
            &near_and_far,
            &RewardConfig {
                lambda_window: lambda,
            },
        );
        println!("lambda {lambda:?}: R_div {:.4}", r.r_div);
    }
}
