use serde::{Deserialize, Serialize};

use super::{background_level, ScanGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurityReport {
    pub background_rate: f64,
    /// Pixels within `2√background` of the background.
    pub clean_fraction: f64,
    pub clean_pixels: usize,
    pub total_pixels: usize,
    /// Row-major clean flags, one string per y row (`1` clean, `0` not).
    pub clean_map: Vec<String>,
}

pub fn purity_report(grid: &ScanGrid) -> PurityReport {
    let bg = background_level(&grid.counts);
    let tol = 2.0 * bg.max(0.0).sqrt();
    let clean: Vec<bool> = grid.counts.iter().map(|c| (c - bg).abs() <= tol).collect();
    let n_clean = clean.iter().filter(|c| **c).count();
    let clean_map = clean
        .chunks(grid.nx())
        .map(|row| row.iter().map(|&c| if c { '1' } else { '0' }).collect())
        .collect();
    PurityReport {
        background_rate: bg,
        clean_fraction: n_clean as f64 / clean.len() as f64,
        clean_pixels: n_clean,
        total_pixels: clean.len(),
        clean_map,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::linear_grid;

    #[test]
    fn uniform_and_hot_spot() {
        let x = linear_grid(0.0, 10.0, 11);
        let mut c = vec![5000.0; 121];
        let g = ScanGrid::new(x.clone(), x.clone(), c.clone()).unwrap();
        let r = purity_report(&g);
        assert_eq!(r.clean_fraction, 1.0);
        assert_eq!(r.background_rate, 5000.0);
        c[60] = 9000.0;
        let r = purity_report(&ScanGrid::new(x.clone(), x, c).unwrap());
        assert_eq!(r.clean_pixels, 120);
        assert_eq!(&r.clean_map[5][5..6], "0");
    }
}
