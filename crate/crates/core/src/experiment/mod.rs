//! Experiment commands: single runs, the horizon grid, sweeps, ablations and
//! end-to-end gradient checking. Each command echoes its effective config,
//! prints an aligned table and writes CSV/JSON artifacts under `out_dir`.

mod config;
mod table;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{Command, DataSource, ExperimentConfig, SweepAxis, KEYS};
pub use table::render as render_table;

use crate::data::{load_csv, PreparedData, SplitPolicy};
use crate::model::{save_checkpoint, Batch, Decomposition, PatchMlp};
use crate::numerics::{grad_check, mse_loss, GradCheckReport, Matrix, Rng};
use crate::synth::{column_names, generate};
use crate::training::{append_summary, train, RunReport, INIT_STREAM};
use crate::{Error, Result};

/// Max relative gradient error for a passing gradcheck.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Averaged (MSE, MAE) over the four horizons at `L = 96` reported for
/// PatchMLP on the ETT datasets.
pub fn published_reference(dataset: &str) -> Option<(f64, f64)> {
    match dataset.to_ascii_lowercase().as_str() {
        "etth1" => Some((0.438, 0.429)),
        "etth2" => Some((0.349, 0.378)),
        "ettm1" => Some((0.374, 0.382)),
        "ettm2" => Some((0.269, 0.311)),
        _ => None,
    }
}

/// A loaded series, before splitting.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub values: Matrix<f64>,
    pub columns: Vec<String>,
    pub policy: SplitPolicy,
}

impl Series {
    pub fn load(config: &ExperimentConfig) -> Result<Self> {
        match config.source()? {
            DataSource::Synthetic(spec) => Ok(Self {
                name: "synth".into(),
                values: generate(&spec)?,
                columns: column_names(spec.variables),
                policy: config.split_policy()?,
            }),
            DataSource::File(spec) => {
                let raw = load_csv(&spec)?;
                Ok(Self {
                    name: config.dataset.clone(),
                    values: raw.values,
                    columns: raw.columns,
                    policy: spec.split,
                })
            }
        }
    }

    pub fn prepare(&self, lookback: usize, horizon: usize) -> Result<PreparedData> {
        PreparedData::new(
            self.name.clone(),
            &self.values,
            self.columns.clone(),
            self.policy,
            lookback,
            horizon,
        )
    }

    pub fn variables(&self) -> usize {
        self.values.cols()
    }
}

fn run_notes(config: &ExperimentConfig, report: &RunReport) -> Vec<String> {
    let m = &report.model;
    let mut notes = vec![
        format!(
            "patch scales {:?} with widths {:?} (latent {}) are this implementation's choice",
            m.scales(),
            report.scale_dims,
            m.latent_dim()
        ),
        format!(
            "instance norm {}, dropout {}, hidden_mult {}, pool_kernel {}, {} blocks",
            if m.use_instance_norm { "on" } else { "off" },
            m.dropout,
            m.hidden_mult,
            m.pool_kernel,
            m.num_blocks
        ),
        format!(
            "adam lr {}, batch {}, max_epochs {}, patience {}",
            report.train.lr, report.train.batch_size, report.train.max_epochs, report.train.patience
        ),
    ];
    if !config.is_explicit("dropout") {
        notes.push("dropout rate is a default, not taken from the reference results".into());
    }
    notes
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::from(e).context(dir.display()))
}

/// Train one model under `config` (its lookback/horizon), write the report,
/// checkpoint and summary row, and return the report.
pub fn run_single(config: &ExperimentConfig, series: &Series) -> Result<RunReport> {
    let m = &config.model;
    let model_config = config.model_for(m.lookback, m.horizon, series.variables());
    model_config.validate()?;
    config.train.validate()?;
    let data = series.prepare(m.lookback, m.horizon)?;
    let mut rng = Rng::stream(config.train.seed, INIT_STREAM);
    let mut model = PatchMlp::<f32>::init(&model_config, &mut rng)?;
    let mut report = train(&mut model, &data, &config.train)?;

    let mut echo = config.clone();
    echo.set("variables", &series.variables().to_string())?;
    report.effective_config = echo.echo();
    report.notes.extend(run_notes(config, &report));

    create_dir(&config.out_dir)?;
    let stem = format!(
        "{}-{}-L{}-T{}-s{}",
        report.dataset.replace(['/', '\\', '.'], "_"),
        report.fingerprint,
        report.lookback,
        report.horizon,
        report.seed
    );
    report.write(&config.out_dir.join(format!("{stem}.json")))?;
    if config.save_checkpoint {
        save_checkpoint(&model, &config.out_dir.join(format!("{stem}.ckpt")))?;
    }
    append_summary(&summary_path(config), &report)?;
    Ok(report)
}

pub fn summary_path(config: &ExperimentConfig) -> PathBuf {
    config.out_dir.join("summary.csv")
}

fn fmt_metric(v: f64) -> String {
    format!("{v:.4}")
}

fn write_echo(config: &ExperimentConfig, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "# effective config")?;
    for line in config.echo_text().lines() {
        writeln!(out, "#   {line}")?;
    }
    Ok(())
}

/// Single training run at the configured lookback and horizon.
pub fn cmd_train(config: &ExperimentConfig, out: &mut dyn Write) -> Result<RunReport> {
    write_echo(config, out)?;
    let series = Series::load(config)?;
    let report = run_single(config, &series)?;
    let rows = vec![vec![
        report.dataset.clone(),
        report.lookback.to_string(),
        report.horizon.to_string(),
        fmt_metric(report.test_mse),
        fmt_metric(report.test_mae),
        fmt_metric(report.train_mse),
        report.best_epoch.to_string(),
        report.steps.to_string(),
    ]];
    let headers = ["dataset", "L", "T", "test MSE", "test MAE", "train MSE", "best epoch", "steps"];
    write!(out, "{}", render_table(&headers, &rows))?;
    writeln!(out, "fingerprint {} seed {} ({:.1}s)", report.fingerprint, report.seed, report.seconds)?;
    Ok(report)
}

/// One row of the horizon grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub instance_norm: bool,
    /// `None` for the average row.
    pub horizon: Option<usize>,
    pub mse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchGrid {
    pub dataset: String,
    pub rows: Vec<BenchRow>,
    pub reference: Option<(f64, f64)>,
    pub csv_path: PathBuf,
}

impl BenchGrid {
    /// The average row for one instance-norm setting.
    pub fn average(&self, instance_norm: bool) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.instance_norm == instance_norm && r.horizon.is_none())
    }
}

/// Every configured horizon at the configured lookback, plus average rows,
/// once per instance-norm setting.
pub fn cmd_bench(config: &ExperimentConfig, out: &mut dyn Write) -> Result<BenchGrid> {
    write_echo(config, out)?;
    if config.horizons.is_empty() || config.bench_instance_norm.is_empty() {
        return Err(Error::Config("horizons and bench_instance_norm must be non-empty".into()));
    }
    let series = Series::load(config)?;
    let mut runs = Vec::new();
    for &norm in &config.bench_instance_norm {
        for &h in &config.horizons {
            let mut c = config.clone();
            c.set("horizon", &h.to_string())?;
            c.set("use_instance_norm", &norm.to_string())?;
            c.model_for(c.model.lookback, h, series.variables()).validate()?;
            runs.push(c);
        }
    }
    let mut rows = Vec::new();
    for &norm in &config.bench_instance_norm {
        let mut group = Vec::new();
        for c in runs.iter().filter(|c| c.model.use_instance_norm == norm) {
            let r = run_single(c, &series)?;
            group.push(BenchRow {
                instance_norm: norm,
                horizon: Some(c.model.horizon),
                mse: r.test_mse,
                mae: r.test_mae,
            });
        }
        let n = group.len() as f64;
        let avg = BenchRow {
            instance_norm: norm,
            horizon: None,
            mse: group.iter().map(|r| r.mse).sum::<f64>() / n,
            mae: group.iter().map(|r| r.mae).sum::<f64>() / n,
        };
        rows.extend(group);
        rows.push(avg);
    }

    let reference = published_reference(&series.name);
    let csv_path = config.out_dir.join("bench.csv");
    write_bench_csv(&csv_path, &rows, reference)?;

    let mut headers = vec!["horizon", "inst. norm", "MSE", "MAE"];
    if reference.is_some() {
        headers.extend(["published MSE", "published MAE", "Δ MSE", "Δ MAE"]);
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![
                r.horizon.map_or("avg".into(), |h| h.to_string()),
                table::mark(r.instance_norm).into(),
                fmt_metric(r.mse),
                fmt_metric(r.mae),
            ];
            if let (Some((pm, pa)), None) = (reference, r.horizon) {
                row.extend([fmt_metric(pm), fmt_metric(pa), format!("{:+.4}", r.mse - pm), format!("{:+.4}", r.mae - pa)]);
            }
            row
        })
        .collect();
    writeln!(out, "{} (L={})", series.name, config.model.lookback)?;
    write!(out, "{}", render_table(&headers, &table))?;
    Ok(BenchGrid {
        dataset: series.name,
        rows,
        reference,
        csv_path,
    })
}

fn write_bench_csv(path: &Path, rows: &[BenchRow], reference: Option<(f64, f64)>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::from(e).context(path.display()))?;
    let mut header = vec!["horizon", "instance_norm", "mse", "mae"];
    if reference.is_some() {
        header.extend(["published_mse", "published_mae", "delta_mse", "delta_mae"]);
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.horizon.map_or("avg".into(), |h| h.to_string()),
            u8::from(r.instance_norm).to_string(),
            r.mse.to_string(),
            r.mae.to_string(),
        ];
        if let Some((pm, pa)) = reference {
            rec.extend([pm.to_string(), pa.to_string(), (r.mse - pm).to_string(), (r.mae - pa).to_string()]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub mse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    pub csv_path: PathBuf,
}

impl SweepResult {
    /// Axis value with the lowest MSE.
    pub fn argmin(&self) -> Option<f64> {
        self.points
            .iter()
            .min_by(|a, b| a.mse.total_cmp(&b.mse))
            .map(|p| p.value)
    }
}

fn sweep_values(config: &ExperimentConfig) -> Vec<(f64, String)> {
    let show = |v: &dyn ToString| v.to_string();
    match config.axis {
        SweepAxis::Patch => config.sweep_patch.iter().map(|&v| (v as f64, show(&v))).collect(),
        SweepAxis::Lookback => config.sweep_lookback.iter().map(|&v| (v as f64, show(&v))).collect(),
        SweepAxis::Lr => config.sweep_lr.iter().map(|&v| (v, show(&v))).collect(),
        SweepAxis::DModel => config.sweep_d_model.iter().map(|&v| (v as f64, show(&v))).collect(),
        SweepAxis::Blocks => config.sweep_blocks.iter().map(|&v| (v as f64, show(&v))).collect(),
    }
}

/// One independent run per axis value, sharing the seed; results sorted by value.
pub fn cmd_sweep(config: &ExperimentConfig, out: &mut dyn Write) -> Result<SweepResult> {
    write_echo(config, out)?;
    let mut values = sweep_values(config);
    if values.is_empty() {
        return Err(Error::Config(format!("sweep_{}: empty sweep list", config.axis.name())));
    }
    values.sort_by(|a, b| a.0.total_cmp(&b.0));
    let series = Series::load(config)?;

    // resolve and validate every point before training any of them
    let mut runs = Vec::new();
    for (v, text) in &values {
        let mut c = config.clone();
        match config.axis {
            SweepAxis::Patch => {
                let p = *v as usize;
                if p == 0 || !c.model.lookback.is_multiple_of(p) {
                    return Err(Error::Config(format!(
                        "sweep_patch: patch {p} does not divide lookback {}",
                        c.model.lookback
                    )));
                }
                c.set("patch_scales", text)?;
            }
            SweepAxis::Lookback => c.set("lookback", text)?,
            SweepAxis::Lr => c.set("lr", text)?,
            SweepAxis::DModel => c.set("d_model", text)?,
            SweepAxis::Blocks => c.set("num_blocks", text)?,
        }
        c.model_for(c.model.lookback, c.model.horizon, series.variables())
            .validate()
            .map_err(|e| e.context(format_args!("{} = {text}", config.axis.name())))?;
        c.train.validate()?;
        runs.push((*v, text.clone(), c));
    }

    let mut points = Vec::new();
    let mut table = Vec::new();
    for (v, text, c) in &runs {
        let r = run_single(c, &series)?;
        table.push(vec![text.clone(), fmt_metric(r.test_mse), fmt_metric(r.test_mae)]);
        points.push(SweepPoint {
            value: *v,
            mse: r.test_mse,
            mae: r.test_mae,
        });
    }

    let csv_path = config.out_dir.join(format!("sweep-{}.csv", config.axis.name()));
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::from(e).context(csv_path.display()))?;
    w.write_record([config.axis.name(), "mse", "mae"])?;
    for ((_, text, _), p) in runs.iter().zip(&points) {
        w.write_record([text.clone(), p.mse.to_string(), p.mae.to_string()])?;
    }
    w.flush()?;

    write!(out, "{}", render_table(&[config.axis.name(), "MSE", "MAE"], &table))?;
    Ok(SweepResult {
        axis: config.axis,
        points,
        csv_path,
    })
}

/// Component switches of one ablation case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AblationCase {
    pub case: usize,
    pub decompose: bool,
    pub mpe: bool,
    pub dot_product: bool,
    pub inter_variable: bool,
    /// Decompose the raw window instead of the latent (case 9).
    pub input_decomposition: bool,
}

/// The nine ablation cases, 1-based.
pub fn ablation_case(case: usize) -> Option<AblationCase> {
    let c = |decompose, mpe, dot_product, inter_variable| AblationCase {
        case,
        decompose,
        mpe,
        dot_product,
        inter_variable,
        input_decomposition: false,
    };
    Some(match case {
        1 => c(true, true, true, true),
        2 => c(true, false, true, true),
        3 => c(true, true, false, true),
        4 => c(true, true, true, false),
        5 => c(false, true, true, true),
        6 => c(false, false, true, true),
        7 => c(false, true, false, true),
        8 => c(false, true, true, false),
        9 => AblationCase {
            input_decomposition: true,
            ..c(true, true, true, true)
        },
        _ => return None,
    })
}

impl AblationCase {
    pub fn apply(&self, config: &mut ExperimentConfig) -> Result<()> {
        let decomposition = if self.input_decomposition {
            Decomposition::Input
        } else if self.decompose {
            Decomposition::Latent
        } else {
            Decomposition::Off
        };
        config.set("decomposition", &decomposition.to_string())?;
        config.set("use_mpe", &self.mpe.to_string())?;
        config.set("use_dot_product", &self.dot_product.to_string())?;
        config.set("use_inter_variable", &self.inter_variable.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub case: AblationCase,
    pub mse: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationGrid {
    pub rows: Vec<AblationRow>,
    pub csv_path: PathBuf,
}

impl AblationGrid {
    pub fn case(&self, case: usize) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.case.case == case)
    }
}

const CIRCLED: [&str; 9] = ["①", "②", "③", "④", "⑤", "⑥", "⑦", "⑧", "⑨"];

/// Run the selected ablation cases at the configured lookback and horizon.
pub fn cmd_ablate(config: &ExperimentConfig, out: &mut dyn Write) -> Result<AblationGrid> {
    write_echo(config, out)?;
    let cases = config
        .ablate_cases
        .iter()
        .map(|&c| ablation_case(c).ok_or_else(|| Error::Config(format!("ablate_cases: no case {c} (expected 1-9)"))))
        .collect::<Result<Vec<_>>>()?;
    if cases.is_empty() {
        return Err(Error::Config("ablate_cases: empty case list".into()));
    }
    let series = Series::load(config)?;
    let mut runs = Vec::new();
    for case in &cases {
        let mut c = config.clone();
        case.apply(&mut c)?;
        c.model_for(c.model.lookback, c.model.horizon, series.variables()).validate()?;
        runs.push((*case, c));
    }
    let mut rows = Vec::new();
    for (case, c) in &runs {
        let r = run_single(c, &series)?;
        rows.push(AblationRow {
            case: *case,
            mse: r.test_mse,
            mae: r.test_mae,
        });
    }

    let csv_path = config.out_dir.join("ablation.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::from(e).context(csv_path.display()))?;
    w.write_record([
        "case",
        "decompose",
        "mpe",
        "dot_product",
        "inter_variable",
        "input_decomposition",
        "mse",
        "mae",
    ])?;
    let bit = |b: bool| u8::from(b).to_string();
    for r in &rows {
        let c = r.case;
        w.write_record([
            c.case.to_string(),
            bit(c.decompose),
            bit(c.mpe),
            bit(c.dot_product),
            bit(c.inter_variable),
            bit(c.input_decomposition),
            r.mse.to_string(),
            r.mae.to_string(),
        ])?;
    }
    w.flush()?;

    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let c = r.case;
            let decompose = if c.input_decomposition {
                "✓ (input)".to_string()
            } else {
                table::mark(c.decompose).to_string()
            };
            vec![
                CIRCLED[c.case - 1].to_string(),
                decompose,
                table::mark(c.mpe).into(),
                table::mark(c.dot_product).into(),
                table::mark(c.inter_variable).into(),
                fmt_metric(r.mse),
                fmt_metric(r.mae),
            ]
        })
        .collect();
    let headers = ["Case", "Decompose", "MPE", "Dot Product", "Inter Variable", "MSE", "MAE"];
    write!(out, "{}", render_table(&headers, &table))?;
    Ok(AblationGrid { rows, csv_path })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckOutcome {
    pub report: GradCheckReport,
    pub passed: bool,
    pub seconds: f64,
}

/// End-to-end finite-difference check of the whole network in double
/// precision on random inputs.
pub fn cmd_gradcheck(config: &ExperimentConfig, out: &mut dyn Write) -> Result<GradcheckOutcome> {
    write_echo(config, out)?;
    let mut mc = config.model_for(config.model.lookback, config.model.horizon, config.model.variables);
    if mc.lookback > 16 || mc.variables > 3 || mc.d_model > 32 || mc.latent_dim() > 32 {
        return Err(Error::Config(format!(
            "gradcheck needs a tiny config (lookback <= 16, variables <= 3, d_model <= 32), got lookback {}, variables {}, d_model {}",
            mc.lookback, mc.variables, mc.d_model
        )));
    }
    mc.dropout = 0.0;
    mc.validate()?;
    let start = Instant::now();
    let seed = config.train.seed;
    let mut model = PatchMlp::<f64>::init(&mc, &mut Rng::stream(seed, INIT_STREAM))?;
    model.set_gradient_fault(config.corrupt_gradient);
    let mut rng = Rng::stream(seed, 3);
    let (histories, futures): (Vec<_>, Vec<_>) = (0..2)
        .map(|_| {
            (
                Matrix::from_fn(mc.lookback, mc.variables, |_, _| rng.normal()),
                Matrix::from_fn(mc.horizon, mc.variables, |_, _| rng.normal()),
            )
        })
        .unzip();
    let batch = Batch::from_windows(&histories, Some(&futures))?;
    let targets = batch.targets.clone().expect("targets");
    let report = grad_check(&mut model, config.gradcheck_eps, |m, backward| {
        let pred = m.forward_batch(&batch, false)?;
        let (loss, g) = mse_loss(&pred, &targets)?;
        if backward {
            m.backward_batch(&g)?;
        }
        Ok(loss)
    })?;
    let passed = report.max_relative_error < GRADCHECK_TOLERANCE;
    writeln!(
        out,
        "gradcheck {}: max relative error {:.3e} (tolerance {:.0e}) at {} (analytic {:.6e}, numeric {:.6e}), {} entries, {:.1}s",
        if passed { "PASS" } else { "FAIL" },
        report.max_relative_error,
        GRADCHECK_TOLERANCE,
        report.worst_param,
        report.analytic,
        report.numeric,
        report.entries_checked,
        start.elapsed().as_secs_f64()
    )?;
    Ok(GradcheckOutcome {
        report,
        passed,
        seconds: start.elapsed().as_secs_f64(),
    })
}
