use arnqs::ensemble::{run_entropy_grid, Estimator, SweepGrid};
use arnqs::models::{init_gaussian, ActivationKind, AtfSpec, AttentionKind, CellKind, ModelSpec, Network, PhaseMode, RnnSpec};
use arnqs::numerics::RngStream;
use arnqs::sampling::ancestral_sample;
use arnqs::vmc::{exact_energy, exact_ground_energy, vmc_optimize, Hamiltonian, VmcConfig};

fn rnn(l: usize, d_h: usize) -> ModelSpec {
    ModelSpec::Rnn(RnnSpec {
        l,
        d_h,
        cell: CellKind::Vanilla,
        f: ActivationKind::Tanh,
        g: ActivationKind::Softmax,
        phase_mode: PhaseMode::Complex,
    })
}

fn atf(l: usize) -> ModelSpec {
    ModelSpec::Atf(AtfSpec {
        l,
        d_emb: 8,
        heads: 2,
        attention: AttentionKind::Circulant,
        f_fl: ActivationKind::Relu,
        g: ActivationKind::SquareModulus,
        d_fl: None,
        n_ffl: 1,
        phase_mode: PhaseMode::Complex,
    })
}

#[test]
fn ancestral_samples_follow_enumerated_distribution() {
    for spec in [rnn(5, 6), atf(5)] {
        let mut rng = RngStream::new(17);
        let net = Network::new(&spec, &init_gaussian(&spec, 1.0, &mut rng)).unwrap();
        let (lp, _) = net.enumerate();
        let n = 200_000;
        let batch = ancestral_sample(&net, n, &mut rng).unwrap();
        let mut counts = vec![0usize; 32];
        for row in batch.rows() {
            // site 0 is the most significant bit
            let idx = row.iter().fold(0usize, |acc, &s| (acc << 1) | s as usize);
            counts[idx] += 1;
        }
        let tv: f64 = 0.5 * counts.iter().zip(&lp).map(|(&c, l)| (c as f64 / n as f64 - l.exp()).abs()).sum::<f64>();
        assert!(tv < 0.01, "tv {tv}");
    }
}

#[test]
fn swap_grid_tracks_exact_grid() {
    let grid = SweepGrid {
        arch_axis: vec![6],
        sigma_axis: vec![0.0, 0.5, 2.0],
        n_init: 3,
        base_seed: 9,
    };
    let spec = rnn(8, 6);
    let exact = run_entropy_grid(&spec, &grid, Estimator::Exact).unwrap();
    let swap = run_entropy_grid(&spec, &grid, Estimator::Swap { n_samples: 40_000 }).unwrap();
    for (a, b) in exact.cells.iter().zip(&swap.cells) {
        let (a, b) = (a.stats.unwrap().mean, b.stats.unwrap().mean);
        assert!((a - b).abs() < 0.05 + 0.1 * a, "{a} vs {b}");
    }
    assert_eq!(exact.cell(6, 0.0).unwrap().stats.unwrap().mean, 0.0);
}

#[test]
fn short_vmc_run_lowers_the_energy() {
    let spec = rnn(4, 4);
    let ham = Hamiltonian::tfim(4, 1.0, 0.7);
    let params = init_gaussian(&spec, 0.5, &mut RngStream::new(3));
    let e_start = exact_energy(&Network::new(&spec, &params).unwrap(), &ham).unwrap();
    let e0 = exact_ground_energy(&ham).unwrap();
    let res = vmc_optimize(&spec, &params, &ham, &VmcConfig::new(1e-2, 256, 300, 5), e0).unwrap();
    let e_end = exact_energy(&Network::new(&spec, &res.final_params).unwrap(), &ham).unwrap();
    assert!(e_end < e_start - 0.1 * (e_start - e0), "{e_start} -> {e_end}, E0 {e0}");
    assert!(e_end >= e0 - 1e-9);
}
