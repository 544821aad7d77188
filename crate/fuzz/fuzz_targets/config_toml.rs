#![no_main]

use factorseg::benchmark::BenchmarkGrid;
use factorseg::DetectConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = DetectConfig::from_toml_str(text) {
        let _ = cfg.validate();
    }
    if let Ok(grid) = BenchmarkGrid::from_toml_str(text) {
        // expansion is a cross product; keep it bounded
        let cells: usize = grid
            .scenarios
            .iter()
            .map(|g| g.n.len() * g.len.len() * g.phi.len() * g.sigma.len() * g.varrho.len())
            .sum();
        if cells <= 10_000 {
            assert_eq!(grid.expand().len(), cells);
        }
    }
});
