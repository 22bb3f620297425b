use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Image width the converter picks for every generated file.
const ROW: usize = 128;

/// Writes `families × per_family` synthetic binaries under
/// `root/family_<f>/<n>.bin`. Each family repeats a one-row motif of
/// constant-valued runs whose length depends on the family (4, 8, 16, ...
/// bytes), so its images show vertical bands of a family specific width.
/// Files differ in length, motif phase and a sprinkle of noise
/// bytes.
pub fn write_toy_corpus(root: &Path, families: usize, per_family: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for f in 0..families {
        let run = 4usize << (f % 5);
        let dir = root.join(format!("family_{f}"));
        std::fs::create_dir_all(&dir).unwrap();
        let motif: Vec<u8> = (0..ROW / run)
            .flat_map(|_| std::iter::repeat_n(rng.random::<u8>(), run))
            .collect();
        for n in 0..per_family {
            // 30-60 KB files all map to 128-pixel rows.
            let size = rng.random_range(31 * 1024..59 * 1024);
            let phase = rng.random_range(0..ROW);
            let bytes: Vec<u8> = (0..size)
                .map(|i| {
                    if rng.random_bool(0.05) {
                        rng.random()
                    } else {
                        motif[(i + phase) % ROW]
                    }
                })
                .collect();
            std::fs::write(dir.join(format!("{n:03}.bin")), bytes).unwrap();
        }
    }
}
