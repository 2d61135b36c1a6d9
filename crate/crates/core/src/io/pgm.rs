use std::io::{self, Write};

use crate::sweep::SpectrumMap;

/// Gray levels, row-major from the highest frequency down; |S21| maps
/// linearly from `[0, max]` onto `[255, 0]`. An all-zero map is white.
pub fn heatmap_pixels(map: &SpectrumMap) -> Vec<u8> {
    let max = map.max_abs();
    let (nh, nw) = (map.fields().len(), map.freqs().len());
    let mut out = Vec::with_capacity(nh * nw);
    for j in (0..nw).rev() {
        for i in 0..nh {
            let level = if max > 0.0 {
                255.0 * (1.0 - map.get(i, j).norm() / max)
            } else {
                255.0
            };
            out.push(level.round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// Binary PGM: one column per field, one row per frequency.
pub fn write_pgm<W: Write>(mut w: W, map: &SpectrumMap) -> io::Result<()> {
    write!(w, "P5\n{} {}\n255\n", map.fields().len(), map.freqs().len())?;
    w.write_all(&heatmap_pixels(map))?;
    w.flush()
}
