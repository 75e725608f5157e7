//! Input panels shared by the benchmarks.

use esac_core::{simulate, DataMatrix, Direction, NEff, NoiseModel, SignalScale, SimulationSpec};

/// Gaussian noise with unit variance and no changes.
pub fn null_panel(n: usize, p: usize, seed: u64) -> DataMatrix {
    panel(n, p, vec![], vec![], 0.0, seed)
}

/// Equally spaced changes of full sparsity, each `c` times the rate.
pub fn stepped_panel(n: usize, p: usize, j: usize, c: f64, seed: u64) -> DataMatrix {
    let cps: Vec<usize> = (1..=j).map(|i| i * n / (j + 1)).collect();
    panel(n, p, cps, vec![p; j], c, seed)
}

fn panel(n: usize, p: usize, changepoints: Vec<usize>, sparsities: Vec<usize>, c: f64, seed: u64) -> DataMatrix {
    let spec = SimulationSpec {
        n,
        p,
        changepoints,
        sparsities,
        direction: Direction::Signs,
        c,
        noise: NoiseModel::M0,
        sigma: 1.0,
        n_eff: NEff::N4,
        scale: SignalScale::Rate,
        seed,
        replicate: 0,
    };
    simulate(&spec).expect("valid benchmark spec").0
}
