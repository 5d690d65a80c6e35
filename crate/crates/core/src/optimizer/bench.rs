//! Baseline schemes: equal uplink powers, and battery-powered devices with a
//! conventional RF base-station receiver.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rates::{Allocation, DeviceBounds, Scheme};
use crate::scenario::{FrontEnd, ReceiverKind, Scenario};

use super::{alternate, Design, EnergyModel, OptimizerOptions, Problem, Solution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    /// RAQR receiver, harvested energy, `p^p_k = p^d_k`.
    EqualUlPowers,
    /// RF receiver, battery-powered devices, full optimization.
    RfFullOpt,
    /// RF receiver, battery-powered devices, `p^p_k = p^d_k`.
    RfEqualUl,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 3] = [Self::EqualUlPowers, Self::RfFullOpt, Self::RfEqualUl];

    pub fn name(self) -> &'static str {
        match self {
            Self::EqualUlPowers => "equal_ul_powers",
            Self::RfFullOpt => "rf_full_opt",
            Self::RfEqualUl => "rf_equal_ul",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkSpec {
    pub kind: BenchmarkKind,
    /// Replaces the scenario's RF front-end for the RF kinds.
    pub frontend: Option<FrontEnd>,
    /// Per-device average uplink power budget (W) for the RF kinds; the
    /// scenario's battery setting when `None`.
    pub battery_w: Option<f64>,
}

impl BenchmarkSpec {
    pub fn new(kind: BenchmarkKind) -> Self {
        BenchmarkSpec {
            kind,
            frontend: None,
            battery_w: None,
        }
    }

    pub fn design(&self, scenario: &Scenario) -> Design {
        let battery = EnergyModel::Battery(self.battery_w.unwrap_or_else(|| scenario.system.battery_watts()));
        match self.kind {
            BenchmarkKind::EqualUlPowers => Design {
                tie_ul: true,
                ..Design::full()
            },
            BenchmarkKind::RfFullOpt => Design {
                receiver: ReceiverKind::Rf,
                energy: battery,
                tie_ul: false,
                fix_alpha: false,
            },
            BenchmarkKind::RfEqualUl => Design {
                receiver: ReceiverKind::Rf,
                energy: battery,
                tie_ul: true,
                fix_alpha: false,
            },
        }
    }
}

/// Per-device rates of a final allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub devices: Vec<DeviceBounds>,
    pub uplink: f64,
    pub downlink: f64,
    pub sum_rate: f64,
}

impl RateReport {
    pub fn new(problem: &Problem<'_>, a: &Allocation) -> Result<Self> {
        let devices = problem.model().bounds(problem.scheme, a)?;
        let uplink = devices.iter().map(|d| d.r_u).sum();
        let downlink = devices.iter().map(|d| d.r_d).sum();
        Ok(RateReport {
            devices,
            uplink,
            downlink,
            sum_rate: uplink + downlink,
        })
    }
}

pub fn run_benchmark(
    spec: &BenchmarkSpec,
    scenario: &Scenario,
    scheme: Scheme,
    opts: &OptimizerOptions,
) -> Result<(Solution, RateReport)> {
    let mut local = scenario.clone();
    if let Some(fe) = spec.frontend {
        fe.validate()?;
        local.rf = fe;
    }
    let problem = Problem::new(&local, scheme, spec.design(&local));
    let sol = alternate(&problem, None, opts)?;
    let report = RateReport::new(&problem, &sol.allocation)?;
    Ok((sol, report))
}

/// Full design together with the equal-uplink-power baseline it is
/// warm-started from.
#[derive(Debug, Clone, PartialEq)]
pub struct FullResult {
    pub full: Solution,
    pub report: RateReport,
    pub equal_ul: Solution,
}

/// Proposed design. The equal-power baseline is solved first and its
/// solution seeds the unrestricted problem, so the result never falls below
/// the baseline.
pub fn optimize_full(scenario: &Scenario, scheme: Scheme, opts: &OptimizerOptions) -> Result<FullResult> {
    let (equal_ul, _) = run_benchmark(&BenchmarkSpec::new(BenchmarkKind::EqualUlPowers), scenario, scheme, opts)?;
    let problem = Problem::full(scenario, scheme);
    let full = alternate(&problem, Some(&equal_ul.allocation), opts)?;
    let report = RateReport::new(&problem, &full.allocation)?;
    Ok(FullResult {
        full,
        report,
        equal_ul,
    })
}
