//! Detuning scans: one prepared interferometer evaluated over a grid in
//! parallel, reduced to lock-in curves and metrology figures.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ScanError;
use crate::interferometer::{Interferometer, ProtocolParams};
use crate::metrology::{argmax, fwhm, linspace, precision_from_signal, reference_limits, PrecisionCurve, SignalCurve};
use crate::observables::{fidelity, moments, n0_distribution, DetectionModel, OutcomeDistribution};

/// Default number of detuning points.
pub const DEFAULT_GRID_POINTS: usize = 201;

/// Default grid `delta T in [-pi/2, pi/2]`: one full period of the ideal
/// signal, so the grid edges sit at its minima.
pub fn default_grid(big_t: f64, points: usize) -> Vec<f64> {
    let half = FRAC_PI_2 / big_t;
    linspace(-half, half, points)
}

/// Noise-free outcome at one detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub delta: f64,
    pub fidelity: f64,
    pub distribution: OutcomeDistribution,
}

#[derive(Debug, Clone)]
pub struct DeltaScan {
    pub params: ProtocolParams,
    pub points: Vec<ScanPoint>,
}

impl DeltaScan {
    pub fn run(params: &ProtocolParams, grid: &[f64]) -> Result<Self, ScanError> {
        if grid.is_empty() {
            return Err(ScanError::EmptyGrid);
        }
        let ifm = Interferometer::prepare(params)?;
        Self::with_interferometer(&ifm, grid)
    }

    /// Evaluates every detuning in parallel; results keep grid order.
    pub fn with_interferometer(ifm: &Interferometer, grid: &[f64]) -> Result<Self, ScanError> {
        if grid.is_empty() {
            return Err(ScanError::EmptyGrid);
        }
        let points = grid
            .par_iter()
            .map(|&delta| -> Result<ScanPoint, ScanError> {
                let out = ifm.measured_state(delta)?;
                Ok(ScanPoint {
                    delta,
                    fidelity: fidelity(ifm.input_state(), &out)?,
                    distribution: n0_distribution(&out),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { params: *ifm.params(), points })
    }

    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta).collect()
    }

    /// Lock-in curve seen through `detection`.
    pub fn curve(&self, detection: DetectionModel) -> Result<SignalCurve, ScanError> {
        let mut mean = Vec::with_capacity(self.points.len());
        let mut std = Vec::with_capacity(self.points.len());
        for p in &self.points {
            let (m, s) = moments(&detection.apply(&p.distribution)?);
            mean.push(m);
            std.push(s);
        }
        Ok(SignalCurve::new(
            self.params.n_total,
            self.params.big_t,
            self.grid(),
            self.points.iter().map(|p| p.fidelity).collect(),
            mean,
            std,
        )?)
    }
}

/// Figures of merit of one lock-in curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockInMetrics {
    pub n_total: u32,
    /// Half-maximum width of the fidelity peak.
    pub linewidth: f64,
    pub fidelity_at_zero: f64,
    pub mean_n0_at_zero: f64,
    /// Detuning of the largest `<N_0>`.
    pub signal_peak_delta: f64,
    pub delta_star: Option<f64>,
    pub delta_omega_min: Option<f64>,
    pub sql: f64,
    pub heisenberg: f64,
}

impl LockInMetrics {
    pub fn from_curve(curve: &SignalCurve) -> Result<(Self, PrecisionCurve), ScanError> {
        let precision = precision_from_signal(curve, curve.big_t)?;
        let (sql, heisenberg) = reference_limits(curve.n_total, curve.big_t)?;
        let c = curve.center();
        let metrics = Self {
            n_total: curve.n_total,
            linewidth: fwhm(&curve.delta, &curve.fidelity)?,
            fidelity_at_zero: curve.fidelity[c],
            mean_n0_at_zero: curve.mean_n0[c],
            signal_peak_delta: curve.delta[argmax(&curve.mean_n0)],
            delta_star: precision.optimum.map(|o| o.0),
            delta_omega_min: precision.optimum.map(|o| o.1),
            sql,
            heisenberg,
        };
        Ok((metrics, precision))
    }

    pub fn beats_sql(&self) -> bool {
        self.delta_omega_min.is_some_and(|d| d <= self.sql)
    }
}

/// Column header of the detuning-scan table.
pub const DELTA_CSV_HEADER: &str = "delta,fidelity,mean_n0,std_n0,delta_omega";

/// The detuning-scan table as CSV; divergent precision points print `inf`.
/// Numbers use the shortest round-trip representation, so equal curves give
/// identical bytes.
pub fn delta_csv(curve: &SignalCurve, precision: &PrecisionCurve) -> String {
    let mut out = String::with_capacity(64 * (curve.len() + 1));
    out.push_str(DELTA_CSV_HEADER);
    out.push('\n');
    for i in 0..curve.len() {
        let dw = precision.delta_omega.get(i).copied().flatten().unwrap_or(f64::INFINITY);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            curve.delta[i], curve.fidelity[i], curve.mean_n0[i], curve.std_n0[i], dw
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::ProtocolMode;

    fn analytic(n: u32) -> ProtocolParams {
        ProtocolParams { n_total: n, mode: ProtocolMode::AnalyticAdiabatic, ..Default::default() }
    }

    #[test]
    fn empty_grid_rejected() {
        assert_eq!(DeltaScan::run(&analytic(4), &[]).unwrap_err(), ScanError::EmptyGrid);
    }

    #[test]
    fn analytic_scan_is_symmetric_and_locks_in() {
        let p = analytic(8);
        let scan = DeltaScan::run(&p, &default_grid(p.big_t, 101)).unwrap();
        let curve = scan.curve(DetectionModel::Ideal).unwrap();
        assert!(SignalCurve::asymmetry(&curve.fidelity) < 1e-8);
        assert!(SignalCurve::asymmetry(&curve.mean_n0) < 1e-8);
        let (m, _) = LockInMetrics::from_curve(&curve).unwrap();
        assert!((m.fidelity_at_zero - 1.0).abs() < 1e-10);
        assert!((m.mean_n0_at_zero - 8.0).abs() < 1e-10);
        assert_eq!(m.signal_peak_delta, 0.0);
        assert!(m.delta_omega_min.unwrap() > m.heisenberg);
    }

    #[test]
    fn noise_keeps_symmetry_and_lowers_peak() {
        let p = analytic(10);
        let scan = DeltaScan::run(&p, &default_grid(p.big_t, 51)).unwrap();
        let mut last = f64::INFINITY;
        for sigma in [0.0, 1.0, 2.0, 4.0] {
            let curve = scan.curve(DetectionModel::from_sigma(sigma)).unwrap();
            assert!(SignalCurve::asymmetry(&curve.mean_n0) < 1e-8);
            let peak = curve.mean_n0[curve.center()];
            assert!(peak <= last);
            last = peak;
        }
    }

    #[test]
    fn linewidth_narrows_with_atom_number() {
        let width = |n| {
            let p = analytic(n);
            let scan = DeltaScan::run(&p, &default_grid(p.big_t, 201)).unwrap();
            LockInMetrics::from_curve(&scan.curve(DetectionModel::Ideal).unwrap()).unwrap().0.linewidth
        };
        assert!(width(10) < width(4));
    }

    #[test]
    fn csv_layout() {
        let p = analytic(4);
        let scan = DeltaScan::run(&p, &default_grid(p.big_t, 11)).unwrap();
        let curve = scan.curve(DetectionModel::Ideal).unwrap();
        let (_, precision) = LockInMetrics::from_curve(&curve).unwrap();
        let csv = delta_csv(&curve, &precision);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], DELTA_CSV_HEADER);
        assert_eq!(lines.len(), 12);
        assert!(lines[6].starts_with("0,1,4,0,inf"), "{}", lines[6]);
    }

    #[test]
    fn parallel_scan_matches_serial_evaluation() {
        let p = analytic(6);
        let grid = default_grid(p.big_t, 21);
        let scan = DeltaScan::run(&p, &grid).unwrap();
        let ifm = Interferometer::prepare(&p).unwrap();
        for (pt, &d) in scan.points.iter().zip(&grid) {
            let out = ifm.measured_state(d).unwrap();
            assert_eq!(pt.distribution, n0_distribution(&out));
        }
    }
}
