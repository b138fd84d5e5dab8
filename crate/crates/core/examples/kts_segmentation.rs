//! Kernel temporal segmentation on a sequence with three visual scenes.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use vsumm::segmentation::{boundary_penalty, kts_segment, map_segments_to_original, KernelScatter};

fn main() -> vsumm::Result<()> {
    let lengths = [12, 7, 16];
    let steps: usize = lengths.iter().sum();
    let noise = Normal::new(0.0, 0.15).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut x = Array2::zeros((steps, 5));
    let mut t = 0;
    for (scene, &len) in lengths.iter().enumerate() {
        for row in t..t + len {
            x[[row, scene]] = 1.0;
            x.row_mut(row).mapv_inplace(|v| v + noise.sample(&mut rng));
        }
        t += len;
    }

    let kernel = KernelScatter::new(x.view());
    for (m, (scatter, cps)) in kernel.optimal_segmentations(5).iter().enumerate() {
        let cost = scatter + boundary_penalty(m, steps);
        println!("m = {m}: scatter {scatter:7.3}, penalized {cost:7.3}, boundaries {cps:?}");
    }

    let result = kts_segment(x.view(), 5, 1.0)?;
    println!("chosen boundaries {:?}", result.change_points);
    let picks: Vec<usize> = (0..steps).map(|t| t * 15).collect();
    let shots = map_segments_to_original(&result, &picks, steps * 15);
    println!("shots in original frames {:?}", shots.segments);
    Ok(())
}
