//! Experiment dispatch: builds the model named by a [`RunConfig`], runs it and
//! collects CSV tables and summary scalars.

use occtime::dynamics::{AbsorptiveGenerator, HeisenbergFamily};
use occtime::linalg::{StateVector, SUPPORT_EPS};
use occtime::luders::{sequence_probability, OutcomeString};
use occtime::models::{
    build_rovelli, exp_has_decayed, exp_interval_probability, monotonicity_report, rovelli_p_curve, ExponentialModel,
    RabiModel, RovelliModel, APP_INIT, APP_OA, APP_OB, SYS_A, SYS_B,
};
use occtime::occurrence::{
    accumulate_f, cdf_table, consistency_residual, first_moment_s, EventFamily, HorizonMode, OccurrenceDistribution,
    Partition, TimeHorizon,
};
use occtime::quadrature::{compensated_prefix_sums, ordered_sum_scalar};
use occtime::zeno::{coupling_sweep, uncoupled_transition, zeno_scan, ZenoExperiment};

use crate::config::{Experiment, ModelKind, RunConfig};
use crate::error::{CliError, Result};
use crate::format::{format_float, Table};

/// Probabilities may overshoot `[0, 1]` by round-off up to this amount; they
/// are clamped before output. Anything larger is a numerical failure.
pub const PROBABILITY_SLACK: f64 = 1e-9;

/// Largest outcome-string length for which the all-strings normalization
/// check is run.
const MAX_ENUMERATED_STRING: usize = 16;

/// Output of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub experiment: Experiment,
    /// Main table.
    pub table: Table,
    /// Extra tables written next to the main one, keyed by file-name suffix.
    pub extra_tables: Vec<(String, Table)>,
    /// Summary scalars, already rendered.
    pub summary: Vec<(String, String)>,
}

struct Builder {
    precision: usize,
    summary: Vec<(String, String)>,
}

impl Builder {
    fn num(&self, x: f64) -> String {
        format_float(x, self.precision)
    }

    fn prob(&self, x: f64) -> Result<String> {
        Ok(self.num(checked_probability(x)?))
    }

    fn put(&mut self, key: &str, value: impl Into<String>) {
        self.summary.push((key.to_string(), value.into()));
    }

    fn put_num(&mut self, key: &str, x: f64) {
        let v = self.num(x);
        self.put(key, v);
    }
}

fn checked_probability(x: f64) -> Result<f64> {
    if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&x) {
        return Err(CliError::Numerical(occtime::Error::InvalidParameter(format!(
            "probability {x} outside [0, 1]"
        ))));
    }
    Ok(x.clamp(0.0, 1.0))
}

/// Equally spaced grid with exact end points.
fn grid(a: f64, b: f64, n_points: usize) -> Vec<f64> {
    let last = n_points - 1;
    (0..n_points).map(|k| if k == last { b } else { a + (b - a) * (k as f64 / last as f64) }).collect()
}

fn rabi(config: &RunConfig) -> Result<RabiModel> {
    RabiModel::new(config.omega).map_err(CliError::invalid)
}

fn rovelli(config: &RunConfig) -> Result<RovelliModel> {
    build_rovelli(config.period, config.c_a, config.c_b).map_err(CliError::invalid)
}

/// Hamiltonian, event projector and initial state of the unitary models.
fn heisenberg_model(config: &RunConfig) -> Result<(HeisenbergFamily, StateVector)> {
    match config.model {
        ModelKind::Rabi => {
            let m = rabi(config)?;
            Ok((m.heisenberg_family().map_err(CliError::invalid)?, m.initial_state().clone()))
        }
        ModelKind::Rovelli => {
            let m = rovelli(config)?;
            Ok((m.heisenberg_family().map_err(CliError::invalid)?, m.initial_state().clone()))
        }
        ModelKind::Exponential => {
            Err(CliError::Validation(format!("model exponential is not available for {}", config.experiment)))
        }
    }
}

pub fn run(config: &RunConfig) -> Result<Report> {
    let mut b = Builder { precision: config.precision, summary: Vec::new() };
    let (table, extra_tables) = match config.experiment {
        Experiment::Decay => (run_decay(config, &mut b)?, Vec::new()),
        Experiment::Occurrence => run_occurrence(config, &mut b)?,
        Experiment::Rovelli => (run_rovelli(config, &mut b)?, Vec::new()),
        Experiment::Oru => (run_oru(config, &mut b)?, Vec::new()),
        Experiment::Zeno => (run_zeno(config, &mut b)?, Vec::new()),
        Experiment::Sweep => (run_sweep(config, &mut b)?, Vec::new()),
    };
    Ok(Report { experiment: config.experiment, table, extra_tables, summary: b.summary })
}

fn run_decay(config: &RunConfig, b: &mut Builder) -> Result<Table> {
    let model = ExponentialModel::new(config.lambda).map_err(CliError::invalid)?;
    let times = grid(config.t_min, config.t_max, config.n_points);

    // the same distribution through the absorptive occurrence pipeline
    let (family, psi) = model.absorptive_family()?;
    let horizon_end = config.t_max.max(40.0 / config.lambda);
    let horizon = TimeHorizon::absorptive(horizon_end).map_err(CliError::invalid)?;
    let (s, diagnostics) = first_moment_s(&family, &horizon, &config.quadrature)?;
    let norm = s.expectation(&psi)?;
    let head = accumulate_f(&family, 0.0, times[0], &config.quadrature)?;
    let mut pieces = vec![head.operator.expectation(&psi)?];
    for w in times.windows(2) {
        pieces.push(accumulate_f(&family, w[0], w[1], &config.quadrature)?.operator.expectation(&psi)?);
    }

    let mut table = Table::new(&["t", "density", "cdf"]);
    let mut max_dev: f64 = 0.0;
    for (&t, cumulative) in times.iter().zip(compensated_prefix_sums(pieces)) {
        let cdf = exp_has_decayed(&model, t)?;
        max_dev = max_dev.max((cumulative / norm - cdf).abs());
        table.push(vec![b.num(t), b.num(model.density(t)?), b.prob(cdf)?]);
    }
    b.put_num("lambda", model.lambda());
    b.put_num("mean_lifetime", model.mean_lifetime());
    b.put_num("half_life", model.half_life());
    b.put_num("total_probability", exp_interval_probability(&model, 0.0, f64::INFINITY)?);
    b.put_num("pipeline_max_deviation", max_dev);
    b.put_num("pipeline_horizon", horizon_end);
    b.put_num("pipeline_tail_indicator", diagnostics.tail_indicator);
    Ok(table)
}

fn occurrence_family(config: &RunConfig) -> Result<(EventFamily, StateVector)> {
    let (family, psi) = match config.model {
        ModelKind::Exponential => {
            let m = ExponentialModel::new(config.lambda).map_err(CliError::invalid)?;
            m.absorptive_family().map_err(CliError::invalid)?
        }
        ModelKind::Rabi | ModelKind::Rovelli => {
            let (heis, psi) = heisenberg_model(config)?;
            let family = if config.mode == HorizonMode::Absorptive {
                let decay = heis.seed().scaled(config.gamma);
                let generator = AbsorptiveGenerator::new(heis.hamiltonian().clone(), decay).map_err(CliError::invalid)?;
                EventFamily::absorptive(generator, heis.seed().clone())
            } else {
                EventFamily::unitary(heis.hamiltonian().clone(), heis.seed().clone())
            };
            (family.map_err(CliError::invalid)?, psi)
        }
    };
    Ok((family, psi))
}

fn run_occurrence(config: &RunConfig, b: &mut Builder) -> Result<(Table, Vec<(String, Table)>)> {
    let (family, psi) = occurrence_family(config)?;
    let horizon = TimeHorizon::new(config.t_min, config.t_max, config.mode).map_err(CliError::invalid)?;
    let partition = Partition::uniform(&horizon, config.partitions).map_err(CliError::invalid)?;
    let dist = OccurrenceDistribution::build(&family, horizon, partition, &config.quadrature, SUPPORT_EPS)?;
    let (_, diagnostics) = first_moment_s(&family, &horizon, &config.quadrature)?;
    let probabilities = dist.probabilities(&psi)?;

    let mut table = Table::new(&["t1", "t2", "probability"]);
    for ((t1, t2), p) in dist.partition().intervals().zip(&probabilities) {
        table.push(vec![b.num(t1), b.num(t2), b.prob(*p)?]);
    }

    let rho = psi.to_density();
    let mut residual: f64 = 0.0;
    for k in 0..dist.len() {
        residual = residual.max(consistency_residual(&rho, &dist, k..k + 1)?);
    }
    residual = residual.max(consistency_residual(&rho, &dist, 0..dist.len())?);
    let total = ordered_sum_scalar(probabilities.iter().copied());

    let mut density = Table::new(&["t", "density", "cdf"]);
    for row in cdf_table(&family, &psi, &horizon, config.n_points, &config.quadrature)? {
        density.push(vec![b.num(row.t), b.num(row.density), b.prob(row.cdf)?]);
    }

    let mean = dist.s().expectation(&psi)?;
    b.put("model", config.model.name());
    b.put_num("mean_occurrence", mean);
    b.put_num("rate_mu", 1.0 / mean);
    b.put_num("probability_sum_residual", (total - 1.0).abs());
    b.put_num("normalization_residual", dist.normalization_defect());
    b.put_num("consistency_residual", residual);
    b.put("support_rank", dist.support().rank().to_string());
    b.put_num("tail_indicator", diagnostics.tail_indicator);
    b.put("integrand_evals", dist.evals().to_string());
    Ok((table, vec![("density".into(), density)]))
}

fn run_rovelli(config: &RunConfig, b: &mut Builder) -> Result<Table> {
    let model = rovelli(config)?;
    let times = grid(config.t_min, config.t_max, config.n_points);
    let curve = rovelli_p_curve(&model, &times);
    let mut table = Table::new(&["t", "P"]);
    for pt in &curve {
        table.push(vec![b.num(pt.t), b.prob(pt.p)?]);
    }

    // the defining action of M on the product basis
    let m = model.m().as_dmatrix();
    let mut defect: f64 = 0.0;
    for (sys, app, kept) in [
        (SYS_A, APP_OA, true),
        (SYS_B, APP_OB, true),
        (SYS_A, APP_OB, false),
        (SYS_B, APP_OA, false),
        (SYS_A, APP_INIT, false),
        (SYS_B, APP_INIT, false),
    ] {
        let v = RovelliModel::basis_state(sys, app);
        let image = m * v.amplitudes();
        let residual = if kept { (image - v.amplitudes()).norm() } else { image.norm() };
        defect = defect.max(residual);
    }

    let t = model.measurement_time();
    let first_leg: Vec<_> = curve.iter().copied().filter(|pt| pt.t <= t).collect();
    let whole = monotonicity_report(&curve);
    b.put_num("T", t);
    b.put_num("P_0", model.p(0.0));
    b.put_num("P_T", model.p(t));
    b.put_num("defining_equations_residual", defect);
    b.put("monotone_on_0_T", monotonicity_report(&first_leg).monotone.to_string());
    b.put("monotone_on_grid", whole.monotone.to_string());
    b.put("first_violation_t", whole.first_violation_t.map(|x| b.num(x)).unwrap_or_else(|| "none".into()));
    Ok(table)
}

fn run_oru(config: &RunConfig, b: &mut Builder) -> Result<Table> {
    let (family, psi) = heisenberg_model(config)?;
    let string = OutcomeString::from_bits(&config.times, &config.outcomes).map_err(CliError::invalid)?;
    let result = sequence_probability(&family, &psi, &string)?;
    let mut table = Table::new(&["k", "t_k", "outcome_k", "cumulative_probability"]);
    for (k, ((t, outcome), p)) in string.iter().zip(&result.cumulative).enumerate() {
        table.push(vec![(k + 1).to_string(), b.num(t), outcome.as_u8().to_string(), b.prob(*p)?]);
    }
    b.put("model", config.model.name());
    b.put_num("joint_probability", checked_probability(result.probability)?);
    if string.len() <= MAX_ENUMERATED_STRING {
        let strings = OutcomeString::enumerate(&config.times)?;
        let probabilities =
            strings.iter().map(|s| Ok(sequence_probability(&family, &psi, s)?.probability)).collect::<Result<Vec<_>>>()?;
        b.put_num("all_strings_residual", (ordered_sum_scalar(probabilities) - 1.0).abs());
    }
    Ok(table)
}

fn zeno_template(config: &RunConfig) -> Result<ZenoExperiment> {
    let (family, psi) = heisenberg_model(config)?;
    let m = family.projector_at(0.0).map_err(CliError::invalid)?;
    ZenoExperiment::new(family.hamiltonian().clone(), &m, psi, config.tau, 1).map_err(CliError::invalid)
}

fn run_zeno(config: &RunConfig, b: &mut Builder) -> Result<Table> {
    let template = zeno_template(config)?;
    let scan = zeno_scan(&template, &config.n_values)?;
    let mut table = Table::new(&["n", "survival", "transition"]);
    for ((n, s), tr) in scan.n_values.iter().zip(&scan.survival).zip(&scan.transition) {
        table.push(vec![n.to_string(), b.prob(*s)?, b.prob(*tr)?]);
    }
    b.put("model", config.model.name());
    b.put_num("tau", config.tau);
    if config.model == ModelKind::Rabi {
        let theta = config.omega * config.tau / 2.0;
        let deviation = scan
            .n_values
            .iter()
            .zip(&scan.survival)
            .map(|(&n, s)| (s - (theta / n as f64).cos().powi(2 * n as i32)).abs())
            .fold(0.0, f64::max);
        b.put_num("theta", theta);
        b.put_num("closed_form_max_deviation", deviation);
    }
    b.put_num("fitted_c", scan.fitted_c);
    b.put("monotone", scan.monotone.to_string());
    b.put_num("final_survival", *scan.survival.last().expect("nonempty scan"));
    Ok(table)
}

fn run_sweep(config: &RunConfig, b: &mut Builder) -> Result<Table> {
    let template = zeno_template(config)?;
    let mut table = Table::new(&["coupling", "protocol", "transition"]);
    for &protocol in &config.protocols {
        for row in coupling_sweep(&template, &config.couplings, protocol)? {
            table.push(vec![b.num(row.coupling), row.protocol.to_string(), b.prob(row.transition)?]);
        }
    }
    b.put("model", config.model.name());
    b.put_num("tau", config.tau);
    b.put_num("uncoupled_transition", uncoupled_transition(&template)?);
    Ok(table)
}
