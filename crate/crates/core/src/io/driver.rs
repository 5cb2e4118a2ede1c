//! Instance-file dispatch to the rounding drivers.

use std::fmt;
use std::str::FromStr;

use crate::baselines::{self, DropRule, ViolationProfile};
use crate::io::instance::InstanceFile;
use crate::io::report::{ReportRow, RoundingReport, RunMeta};
use crate::numeric::dot;
use crate::schedules::{self, ScheduleError, ScheduleParams};
use crate::walk::{self, Lambda, Structure, WalkConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    Round,
    RoundMatroid,
    Degmat,
    Multicrit,
    Rsp,
    LaminarRsp,
    BaselineRandom,
    BaselineIterated,
}

impl Driver {
    pub const ALL: [Driver; 8] = [
        Driver::Round,
        Driver::RoundMatroid,
        Driver::Degmat,
        Driver::Multicrit,
        Driver::Rsp,
        Driver::LaminarRsp,
        Driver::BaselineRandom,
        Driver::BaselineIterated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Driver::Round => "round",
            Driver::RoundMatroid => "round-matroid",
            Driver::Degmat => "degmat",
            Driver::Multicrit => "multicrit",
            Driver::Rsp => "rsp",
            Driver::LaminarRsp => "laminar-rsp",
            Driver::BaselineRandom => "baseline-random",
            Driver::BaselineIterated => "baseline-iterated",
        }
    }
}

impl fmt::Display for Driver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Driver {
    type Err = String;

    /// Accepts the command name or its fixture-directory form (`_` for `-`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.replace('_', "-");
        Driver::ALL.into_iter().find(|d| d.name() == s).ok_or_else(|| format!("unknown driver {s}"))
    }
}

pub fn structure(inst: &InstanceFile) -> Structure {
    if let Some(m) = inst.build_matroid() {
        Structure::Matroid(m)
    } else if let Some(l) = inst.build_laminar() {
        Structure::Laminar(l)
    } else {
        Structure::Free
    }
}

pub fn params(inst: &InstanceFile, cfg: &WalkConfig) -> ScheduleParams {
    ScheduleParams { groups: inst.groups.clone(), ..ScheduleParams::new(cfg.k0) }
}

fn missing(block: &str) -> ScheduleError {
    ScheduleError::Invalid(format!("instance has no {block} block"))
}

/// Report rows for a point `x` against the instance's own constraints.
pub fn menu_rows(inst: &InstanceFile, cfg: &WalkConfig, x: &[f64], lambdas: &[Lambda]) -> Vec<ReportRow> {
    let rows = inst.rows();
    let b: Vec<f64> = rows.iter().map(|r| r.b).collect();
    let a_max: Vec<f64> = rows.iter().map(|r| r.a.iter().fold(0.0, |m: f64, v| m.max(v.abs()))).collect();
    let a: Vec<Vec<f64>> = rows.iter().map(|r| r.a.clone()).collect();
    let delta = schedules::column_sparsity(&a);
    let labels = schedules::assign_parts(&b, &a_max, inst.n, delta, &params(inst, cfg));
    let prof = ViolationProfile::new(&a, &b, x);
    labels
        .into_iter()
        .enumerate()
        .map(|(j, (part, menu))| ReportRow {
            constraint_id: j,
            part,
            b: b[j],
            lambda: lambdas.get(j).copied().unwrap_or(Lambda::Unbounded),
            violation: prof.per_row[j],
            menu,
        })
        .collect()
}

pub fn run_driver(driver: Driver, inst: &InstanceFile, cfg: &WalkConfig, seed: u64) -> Result<RoundingReport, ScheduleError> {
    let p = params(inst, cfg);
    match driver {
        Driver::Round => Ok(schedules::round_full(&inst.y, &inst.rows(), &structure(inst), cfg, &p, seed)?.report),
        Driver::RoundMatroid => {
            let side = inst.side_constraints();
            let out = walk::partial_round(&inst.y, &side, structure(inst), cfg, seed)?;
            let lambdas: Vec<Lambda> = side.iter().map(|s| s.lambda).collect();
            let mut rows = menu_rows(inst, cfg, &out.x, &lambdas);
            // measured against the start point, not the file's targets
            for (r, s) in rows.iter_mut().zip(&side) {
                r.b = dot(&s.a, &inst.y);
                r.violation = (dot(&s.a, &out.x) - r.b).abs();
            }
            let mut meta = RunMeta::new(driver.name(), seed, cfg.preset, cfg.restarts);
            meta.attempts = out.attempts.len();
            meta.iterations = 1;
            meta.truncations = out.report.truncations;
            meta.push("success", out.success);
            meta.push("fractional_start", out.report.fractional_start);
            meta.push("new_integral", out.report.new_integral);
            meta.push("steps", out.report.steps);
            meta.push("stop_reason", format!("{:?}", out.report.reason));
            Ok(RoundingReport { rows, meta, solution: out.x })
        }
        Driver::Degmat => {
            let m = inst.build_matroid().ok_or_else(|| missing("matroid"))?;
            let costs = inst.costs.clone().unwrap_or_else(|| vec![0.0; inst.n]);
            Ok(schedules::degmat(&costs, &inst.degree_constraints(), &m, &inst.y, cfg, &p, seed)?.report)
        }
        Driver::Multicrit => {
            let m = inst.build_matroid().ok_or_else(|| missing("matroid"))?;
            let mc = inst.multicrit.as_ref().ok_or_else(|| missing("multicrit"))?;
            Ok(schedules::multicrit(&m, &mc.costs, &mc.budgets, mc.epsilon, cfg, &p, seed)?.report)
        }
        Driver::Rsp => {
            let paths = inst.paths.as_ref().ok_or_else(|| missing("paths"))?;
            Ok(schedules::rsp(&paths.pairs, &paths.capacities, cfg, &p, seed)?.report)
        }
        Driver::LaminarRsp => {
            let paths = inst.paths.as_ref().ok_or_else(|| missing("paths"))?;
            Ok(schedules::laminar_rsp(&paths.pairs, &paths.requirements, &paths.capacities, cfg, &p, seed)?.report)
        }
        Driver::BaselineRandom | Driver::BaselineIterated => {
            let mut meta = RunMeta::new(driver.name(), seed, cfg.preset, cfg.restarts);
            let x = if driver == Driver::BaselineRandom {
                baselines::randomized_round(&inst.y, seed)
            } else {
                let a: Vec<Vec<f64>> = inst.rows().into_iter().map(|r| r.a).collect();
                let out = baselines::iterated_round(&inst.y, &a, DropRule::default());
                meta.push("dropped", format!("{:?}", out.dropped));
                out.x
            };
            let rows = menu_rows(inst, cfg, &x, &[]);
            Ok(RoundingReport { rows, meta, solution: x })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn driver_names_round_trip() {
        for d in Driver::ALL {
            assert_eq!(d.name().parse::<Driver>().unwrap(), d);
        }
        assert_eq!("laminar_rsp".parse::<Driver>().unwrap(), Driver::LaminarRsp);
        assert!("nope".parse::<Driver>().is_err());
    }
}
