//! Fits the synthetic fixture and prints the per-epoch log.
//!
//! `cargo run --release -p hiner --example fit_fixture -- [noise] [epochs] [budget_bytes] [lr]`

use hiner::bitstream::{quantized_embeddings, quantized_model, bpppb, compression_ratio, reconstruct_from_bitstream, HinerBitstream};
use hiner::codec::{init_model, ArchSpec, EmbedShape};
use hiner::hsi_io::{synth_cube, wavelength_grid, SyntheticSpec};
use hiner::training::{evaluate_psnr, train_hiner, LossConfig, TrainConfig};

fn main() -> hiner::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let (cube, _) = synth_cube(&SyntheticSpec::fixture(0, arg(0, 0.01)))?;
    let grid = wavelength_grid(cube.bands())?;
    let arch = ArchSpec::new(EmbedShape::new(3, 3, 16), vec![3, 2, 2]);
    let model = init_model(cube.dims(), &arch, arg(2, 209_715.0) as usize, 0)?;
    println!("widths {:?}", model.decoder.config.channel_widths);
    let cfg = TrainConfig { epochs: arg(1, 100.0) as usize, lr_init: arg(3, 1e-3), ..TrainConfig::default() };
    let (model, report) = train_hiner(&cube, &grid, model, &LossConfig::default(), &cfg)?;
    for (e, (l, p)) in report.epoch_loss.iter().zip(&report.epoch_psnr).enumerate() {
        if e % 10 == 9 {
            println!("epoch {:4} loss {l:.5} psnr {p:.2}", e + 1);
        }
    }
    println!("final {:.2} dB in {:.1}s", report.final_mean_psnr, report.wall_time_secs);
    let stream = HinerBitstream::from_model(&model, &grid, 8, false)?;
    let (bytes, sizes) = stream.encode()?;
    let decoded = reconstruct_from_bitstream(&bytes, Some(cube.dims()))?;
    let (q8, _) = evaluate_psnr(decoded.data(), &cube)?;
    let rate = bpppb(sizes.rate_payload, cube.dims());
    if std::env::var_os("HINER_DIAG").is_some() {
        let qm = quantized_model(&model, 8)?;
        let qe = quantized_embeddings(&model, &grid, 8)?;
        let fe = model.embeddings(&grid)?;
        let run = |dec: &hiner::codec::Decoder, e: &hiner::codec::Embeddings| -> hiner::Result<f64> {
            let mut out = Vec::new();
            for b in 0..e.bands {
                out.extend(dec.decode(e.band(b))?);
            }
            Ok(evaluate_psnr(&out, &cube)?.0)
        };
        println!("quant decoder only {:.2}, quant embeddings only {:.2}", run(&qm.decoder, &fe)?, run(&model.decoder, &qe)?);
        for t in &stream.tensors {
            println!("{:20} n={:6} scale={:.3e}", t.name, t.codes.len(), t.spec.scale);
        }
    }
    println!("8-bit {q8:.2} dB, {} payload bytes, {rate:.3} bpppb, CR {:.1}", sizes.rate_payload, compression_ratio(16, rate));
    Ok(())
}
