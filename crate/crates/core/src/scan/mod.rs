//! Reduction of confocal maps, depth profiles and PL/Raman spectra.

pub mod depth;
pub mod purity;
pub mod spectrum;
pub mod spots;
pub mod vdp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use depth::{film_thickness, Thickness};
pub use purity::{purity_report, PurityReport};
pub use spectrum::{charge_ratio, identify_peaks, ChargeRatio, Peak};
pub use spots::{detect_spots, Spot, SpotModel};
pub use vdp::{van_der_pauw, VdpResult};

/// Count-rate raster. `counts[iy * nx + ix]` is the rate at `(x[ix], y[iy])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub x_um: Vec<f64>,
    pub y_um: Vec<f64>,
    pub counts: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_rate: Option<f64>,
}

fn check_axis(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::invalid(format!("{name} axis is empty")));
    }
    if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!("{name} axis must be finite and strictly increasing")));
    }
    Ok(())
}

impl ScanGrid {
    pub fn new(x_um: Vec<f64>, y_um: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        check_axis("x", &x_um)?;
        check_axis("y", &y_um)?;
        if counts.len() != x_um.len() * y_um.len() {
            return Err(Error::invalid(format!(
                "grid has {} values for a {}x{} raster",
                counts.len(),
                x_um.len(),
                y_um.len()
            )));
        }
        if counts.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::invalid("count rates must be finite and non-negative"));
        }
        Ok(Self { x_um, y_um, counts, background_rate: None })
    }

    pub fn nx(&self) -> usize {
        self.x_um.len()
    }

    pub fn ny(&self) -> usize {
        self.y_um.len()
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.counts[iy * self.nx() + ix]
    }

    /// Long-format CSV: `x_um,y_um,counts`, x varying fastest.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_um,y_um,counts\n");
        for (iy, y) in self.y_um.iter().enumerate() {
            for (ix, x) in self.x_um.iter().enumerate() {
                out.push_str(&format!("{x},{y},{}\n", self.at(ix, iy)));
            }
        }
        out
    }

    /// Dense matrix CSV: first row `y_um\x_um` then x values; each further
    /// row is a y value followed by that row's counts.
    pub fn to_matrix_csv(&self) -> String {
        let mut out = String::from("y_um\\x_um");
        for x in &self.x_um {
            out.push_str(&format!(",{x}"));
        }
        out.push('\n');
        for (iy, y) in self.y_um.iter().enumerate() {
            out.push_str(&y.to_string());
            for ix in 0..self.nx() {
                out.push_str(&format!(",{}", self.at(ix, iy)));
            }
            out.push('\n');
        }
        out
    }

    /// Parse either CSV layout; the header decides which.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty grid file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols == ["x_um", "y_um", "counts"] {
            let mut rows = Vec::new();
            for (i, line) in lines.enumerate() {
                let v = parse_row(line, i + 2)?;
                if v.len() != 3 {
                    return Err(Error::Parse(format!("line {}: expected 3 columns", i + 2)));
                }
                rows.push((v[0], v[1], v[2]));
            }
            let mut xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let mut ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            ys.sort_by(f64::total_cmp);
            ys.dedup();
            if xs.len() * ys.len() != rows.len() {
                return Err(Error::Parse("long-format grid is not a complete rectangular raster".into()));
            }
            let mut counts = vec![f64::NAN; rows.len()];
            for (x, y, c) in rows {
                let ix = xs.binary_search_by(|v| v.total_cmp(&x)).expect("present");
                let iy = ys.binary_search_by(|v| v.total_cmp(&y)).expect("present");
                counts[iy * xs.len() + ix] = c;
            }
            if counts.iter().any(|c| c.is_nan()) {
                return Err(Error::Parse("long-format grid has duplicate points".into()));
            }
            Self::new(xs, ys, counts)
        } else {
            let xs = cols[1..]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad x axis value '{s}'"))))
                .collect::<Result<Vec<_>>>()?;
            let mut ys = Vec::new();
            let mut counts = Vec::new();
            for (i, line) in lines.enumerate() {
                let v = parse_row(line, i + 2)?;
                if v.len() != xs.len() + 1 {
                    return Err(Error::Parse(format!("line {}: expected {} columns", i + 2, xs.len() + 1)));
                }
                ys.push(v[0]);
                counts.extend_from_slice(&v[1..]);
            }
            Self::new(xs, ys, counts)
        }
    }
}

fn parse_row(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {lineno}: bad number '{}'", s.trim())))
        })
        .collect()
}

/// Two numeric columns with a fixed header pair.
fn parse_two_columns(text: &str, accepted: &[&str]) -> Result<(String, Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() != 2 || !accepted.contains(&cols[0]) {
        return Err(Error::Parse(format!(
            "expected header '<{}>,<counts>', got '{header}'",
            accepted.join("|")
        )));
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let v = parse_row(line, i + 2)?;
        if v.len() != 2 {
            return Err(Error::Parse(format!("line {}: expected 2 columns", i + 2)));
        }
        a.push(v[0]);
        b.push(v[1]);
    }
    Ok((cols[0].to_string(), a, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthProfile {
    pub z_um: Vec<f64>,
    pub counts: Vec<f64>,
}

impl DepthProfile {
    pub fn new(z_um: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        check_axis("z", &z_um)?;
        if z_um.len() != counts.len() {
            return Err(Error::invalid("depth profile columns differ in length"));
        }
        if counts.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("depth profile has non-finite counts"));
        }
        Ok(Self { z_um, counts })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("z_um,counts\n");
        for (z, c) in self.z_um.iter().zip(&self.counts) {
            out.push_str(&format!("{z},{c}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (_, z, c) = parse_two_columns(text, &["z_um"])?;
        Self::new(z, c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralUnit {
    WavelengthNm,
    WavenumberCm1,
}

impl SpectralUnit {
    pub fn column(self) -> &'static str {
        match self {
            SpectralUnit::WavelengthNm => "wavelength_nm",
            SpectralUnit::WavenumberCm1 => "wavenumber_cm1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub unit: SpectralUnit,
    pub axis: Vec<f64>,
    pub counts: Vec<f64>,
}

impl Spectrum {
    pub fn new(unit: SpectralUnit, axis: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        check_axis(unit.column(), &axis)?;
        if axis.len() != counts.len() {
            return Err(Error::invalid("spectrum columns differ in length"));
        }
        if counts.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::invalid("spectrum counts must be finite and non-negative"));
        }
        Ok(Self { unit, axis, counts })
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{},counts\n", self.unit.column());
        for (a, c) in self.axis.iter().zip(&self.counts) {
            out.push_str(&format!("{a},{c}\n"));
        }
        out
    }

    /// The unit comes from the header; it is never guessed from the values.
    pub fn from_csv(text: &str) -> Result<Self> {
        let (col, a, c) = parse_two_columns(text, &["wavelength_nm", "wavenumber_cm1"])?;
        let unit = if col == "wavelength_nm" { SpectralUnit::WavelengthNm } else { SpectralUnit::WavenumberCm1 };
        Self::new(unit, a, c)
    }
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median of the lowest 10 % of values (at least one value).
pub fn lowest_decile_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = (v.len() / 10).max(1);
    median(&mut v[..k])
}

/// Background level by iterated symmetric clipping: start from the
/// lowest-decile median, then repeatedly take the median of the values within
/// `halfwidth(level)` of the current level. The lowest decile alone sits
/// below the true level by about 1.3 noise widths.
pub(crate) fn clipped_level(values: &[f64], halfwidth: impl Fn(f64) -> f64) -> f64 {
    let mut level = lowest_decile_median(values);
    for _ in 0..100 {
        let w = halfwidth(level);
        if !(w > 0.0) {
            break;
        }
        let mut near: Vec<f64> = values.iter().copied().filter(|v| (v - level).abs() <= w).collect();
        if near.is_empty() {
            break;
        }
        let next = median(&mut near);
        if next == level {
            break;
        }
        level = next;
    }
    level
}

/// Poisson-clipped background of a count map.
pub fn background_level(counts: &[f64]) -> f64 {
    clipped_level(counts, |b| 3.0 * b.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_csv_round_trips() {
        let g = ScanGrid::new(vec![0.0, 1.0, 2.0], vec![5.0, 6.0], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(ScanGrid::from_csv(&g.to_csv()).unwrap(), g);
        assert_eq!(ScanGrid::from_csv(&g.to_matrix_csv()).unwrap(), g);
    }

    #[test]
    fn incomplete_long_grid() {
        let text = "x_um,y_um,counts\n0,0,1\n1,0,1\n0,1,1\n";
        assert!(ScanGrid::from_csv(text).is_err());
    }

    #[test]
    fn spectrum_unit_from_header() {
        let s = Spectrum::from_csv("wavenumber_cm1,counts\n1300,1\n1301,2\n").unwrap();
        assert_eq!(s.unit, SpectralUnit::WavenumberCm1);
        assert!(Spectrum::from_csv("lambda,counts\n1,2\n").is_err());
    }
}
