//! Trajectory records and the click-file format.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::params::TimeGrid;
use crate::state::{BlochVector, Observable};

/// Detected photon emissions of one trajectory, in `γt`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClickRecord {
    pub times: Vec<f64>,
    pub t_max: f64,
}

impl ClickRecord {
    pub fn new(t_max: f64) -> Self {
        ClickRecord { times: Vec::new(), t_max }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first(&self) -> Option<f64> {
        self.times.first().copied()
    }

    /// Intervals between consecutive clicks, the first measured from 0.
    pub fn waiting_times(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.times
            .iter()
            .map(|&t| {
                let d = t - prev;
                prev = t;
                d
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.iter().any(|&t| !(0.0..=self.t_max).contains(&t)) {
            return Err(Error::InvalidState("click outside [0, t_max]".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidState("clicks not strictly increasing".into()));
        }
        Ok(())
    }
}

/// Conditional state history on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub grid: TimeGrid,
    pub bloch: Vec<BlochVector>,
    /// `Tr ρ²` of the conditional state at each sample.
    pub purity: Vec<f64>,
    /// `None` for diffusive unravelings.
    pub clicks: Option<ClickRecord>,
}

impl TrajectoryRecord {
    pub fn with_capacity(grid: TimeGrid, clicks: Option<ClickRecord>) -> Self {
        TrajectoryRecord {
            grid,
            bloch: Vec::with_capacity(grid.len),
            purity: Vec::with_capacity(grid.len),
            clicks,
        }
    }

    pub fn push(&mut self, b: BlochVector, purity: f64) {
        self.bloch.push(b);
        self.purity.push(purity);
    }

    pub fn series(&self, obs: Observable) -> Vec<f64> {
        self.bloch.iter().map(|b| obs.from_bloch(b)).collect()
    }
}

/// Number of decimals that gives 12 significant digits for `t`.
fn decimals_for(t: f64) -> usize {
    if t == 0.0 {
        return 11;
    }
    let int_digits = t.abs().log10().floor() as i32 + 1;
    (12 - int_digits).clamp(0, 30) as usize
}

/// Writes the header line and one timestamp per line.
pub fn write_clicks<W: Write>(mut w: W, times: &[f64], seed: u64, traj: u64) -> std::io::Result<()> {
    writeln!(w, "# gamma_t clicks, seed={seed}, traj={traj}")?;
    for &t in times {
        writeln!(w, "{:.*}", decimals_for(t), t)?;
    }
    Ok(())
}

/// Parses newline-delimited timestamps. Lines starting with `#` and blank
/// lines are skipped; timestamps must be non-decreasing.
pub fn read_timestamps<R: BufRead>(r: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        let s = line.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let t: f64 = s
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: `{s}` is not a number", lineno + 1)))?;
        if !t.is_finite() {
            return Err(Error::Parse(format!("line {}: non-finite timestamp", lineno + 1)));
        }
        if out.last().is_some_and(|&p: &f64| t < p) {
            return Err(Error::Parse(format!("line {}: timestamps not sorted", lineno + 1)));
        }
        out.push(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn click_file_round_trip() {
        let times = vec![0.0, 0.001234567890123, 1.5, 12.345678901234, 5999.1234567];
        let mut buf = Vec::new();
        write_clicks(&mut buf, &times, 42, 7).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# gamma_t clicks, seed=42, traj=7\n"));
        assert!(text.contains("\n12.3456789012\n"));
        let back = read_timestamps(&buf[..]).unwrap();
        for (a, b) in times.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0));
        }
    }

    #[test]
    fn reader_rejects_garbage_and_unsorted() {
        assert!(read_timestamps("1.0\nabc\n".as_bytes()).is_err());
        assert!(read_timestamps("2.0\n1.0\n".as_bytes()).is_err());
        assert_eq!(read_timestamps("# only header\n".as_bytes()).unwrap(), Vec::<f64>::new());
    }

    #[test]
    fn waiting_times_from_origin() {
        let c = ClickRecord { times: vec![1.0, 1.5, 4.0], t_max: 5.0 };
        assert_eq!(c.waiting_times(), vec![1.0, 0.5, 2.5]);
        assert!(c.validate().is_ok());
        let bad = ClickRecord { times: vec![1.0, 1.0], t_max: 5.0 };
        assert!(bad.validate().is_err());
    }
}
