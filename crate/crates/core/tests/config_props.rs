use muon_flow::harness::{parse_config, resolve, ExperimentConfig, Preset};
use proptest::prelude::*;

fn preset() -> impl Strategy<Value = Preset> {
    prop::sample::select(vec![Preset::Exp1, Preset::Exp2, Preset::EpsSweep, Preset::Chaos])
}

proptest! {
    #[test]
    fn echoed_config_parses_back(preset in preset(), seed in any::<u64>(), stride in 1usize..50, iters in 0usize..5000, h in 1e-4f64..0.5) {
        let overrides: Vec<(String, String)> = [
            ("seed", seed.to_string()),
            ("record_stride", stride.to_string()),
            ("iters", iters.to_string()),
            ("h", h.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        for cfg in resolve(preset, &overrides).unwrap() {
            let back: ExperimentConfig = parse_config(&cfg.to_kv()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
