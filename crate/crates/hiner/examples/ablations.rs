//! Runs every ablation on the synthetic fixture for a few seeds.
//!
//! `cargo run --release -p hiner --example ablations -- [epochs] [budget_bytes] [seeds] [noise]`

use hiner::codec::{init_model, ArchSpec, EmbedShape};
use hiner::hsi_io::{synth_cube, wavelength_grid, SyntheticSpec};
use hiner::training::{fit_and_measure, Ablation, LossConfig, TrainConfig};

fn main() -> hiner::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let (epochs, budget, seeds, noise) = (arg(0, 100.0) as usize, arg(1, 52_428.0) as usize, arg(2, 3.0) as u64, arg(3, 0.01));
    let (cube, _) = synth_cube(&SyntheticSpec::fixture(0, noise))?;
    let grid = wavelength_grid(cube.bands())?;
    let arch = ArchSpec::new(EmbedShape::new(3, 3, 16), vec![3, 2, 2]);
    println!("variant,seed,bpppb,psnr_float,psnr_q8,secs");
    for seed in 0..seeds {
        for ablation in Ablation::ALL {
            let model = init_model(cube.dims(), &arch, budget, seed)?;
            let cfg = TrainConfig { epochs, seed, ablation, ..TrainConfig::default() };
            let (_, o, _) = fit_and_measure(&cube, &grid, model, &LossConfig::default(), &cfg, 8, false)?;
            println!("{},{seed},{:.3},{:.3},{:.3},{:.1}", o.variant, o.bpppb, o.psnr_float, o.psnr_quantized, o.report.wall_time_secs);
        }
    }
    Ok(())
}
