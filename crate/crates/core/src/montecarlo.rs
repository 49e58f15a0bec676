//! Seeded, schedule-independent Monte-Carlo plumbing.
//!
//! Trajectory `i` always draws from its own ChaCha stream derived from
//! `(seed, i)`, and chunk partial sums are combined in chunk order, so results
//! are bit-identical regardless of thread count or scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const CHUNK: usize = 2048;

/// Random stream for trajectory `index` under `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Sums `per_traj(rng, out)` over `n_traj` trajectories, where each call adds
/// its contribution into a length-`width` accumulator.
pub fn accumulate<F>(n_traj: usize, seed: u64, width: usize, per_traj: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let n_chunks = n_traj.div_ceil(CHUNK);
    let partials: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; width];
            let start = c * CHUNK;
            let end = (start + CHUNK).min(n_traj);
            for i in start..end {
                let mut rng = trajectory_rng(seed, i as u64);
                per_traj(&mut rng, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; width];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn thread_count_does_not_change_results() {
        let run = || {
            accumulate(10_000, 7, 2, |rng, acc| {
                let x: f64 = rng.random();
                acc[0] += x;
                acc[1] += x * x;
            })
        };
        let a = run();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(run);
        assert_eq!(a, b);
    }

    #[test]
    fn streams_differ() {
        let mut a = trajectory_rng(1, 0);
        let mut b = trajectory_rng(1, 1);
        assert_ne!(a.random::<u64>(), b.random::<u64>());
    }
}
