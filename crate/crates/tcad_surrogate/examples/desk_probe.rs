//! Desk-scale training probe: dataset generation time, training time, and
//! split metrics for both surrogate tasks.

use std::time::Instant;

use device_encoding::{DeviceSpec, Task};
use gnn_core::TrainConfig;
use tcad_reference::{generate_tcad_dataset, DatasetConfig};
use tcad_surrogate::{
    build_iv_predictor, build_poisson_emulator, evaluate_unseen, train_surrogate, EmulatorWidths,
    PredictorWidths, SplitTag, SurrogateTrainConfig,
};

fn main() {
    let n: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(300);
    let epochs: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(60);
    let spec = DeviceSpec::default();
    let config = DatasetConfig::default();

    for task in [Task::Poisson, Task::Iv] {
        let t0 = Instant::now();
        let ds = generate_tcad_dataset(n, &spec, task, 1000, &config).unwrap();
        println!(
            "{task:?}: generated {} graphs in {:.2}s ({} skipped)",
            ds.graphs.len(),
            t0.elapsed().as_secs_f64(),
            ds.manifest.skipped.len()
        );

        let pw: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(16);
        let iw: usize = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(32);
        let model_spec = match task {
            Task::Poisson => build_poisson_emulator(
                ds.layout.width(),
                3,
                &EmulatorWidths { gat_layers: 4, heads: 2, head_width: pw },
            )
            .unwrap(),
            Task::Iv => build_iv_predictor(
                ds.layout.width(),
                3,
                &PredictorWidths { gat_layers: 3, heads: 1, head_width: iw },
            )
            .unwrap(),
        };
        println!("  params: {}", gnn_core::count_parameters(&model_spec));
        let train_config = SurrogateTrainConfig {
            train: TrainConfig {
                learning_rate: 2e-3,
                batch_size: 32,
                epochs,
                seed: 7,
                patience: Some(20),
            },
            ..SurrogateTrainConfig::default()
        };
        let t1 = Instant::now();
        let bundle = train_surrogate(task, &ds, model_spec, &train_config).unwrap();
        println!("  trained in {:.1}s", t1.elapsed().as_secs_f64());
        for r in &bundle.reports {
            println!(
                "  {}: mse_norm {:.3e}  r2 {:.4}  (n={})",
                r.split, r.mse_normalized, r.r2, r.sample_count
            );
        }
        let t2 = Instant::now();
        let unseen = generate_tcad_dataset(n / 3, &spec, task, 50_000, &config).unwrap();
        let report = evaluate_unseen(&bundle, &unseen).unwrap();
        println!(
            "  unseen: r2 {:.4} (n={}) [gen+eval {:.1}s]",
            report.r2,
            report.sample_count,
            t2.elapsed().as_secs_f64()
        );
        let test_r2 = bundle.report(SplitTag::Testing).unwrap().r2;
        println!("  |unseen - testing| r2 gap: {:.4}", (report.r2 - test_r2).abs());
    }
}
