use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;
use std::process::ExitCode;

use eqpart::benchmark::{run_study, StudyConfig};
use eqpart::io::{parse_samples_csv, rotation_angle, EstimateDocument, PartitionDocument, RotationDocument};
use eqpart::{
    build_equiprobable, cyclic_orders, default_cycle_order, ensemble_estimate, entropy_marginal_equiquantised,
    entropy_naive, entropy_rotated, estimate_equiprobable, optimise_rotation, rotate, winsorise, Error,
    OptimizerConfig, SampleSet,
};

use super::{BenchmarkArgs, DumpArgs, EstimateArgs, Format, InputArgs, MethodArg, TreeArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Usage,
    Io,
    Parse,
    Precondition,
}

impl Exit {
    fn code(self) -> u8 {
        match self {
            Exit::Usage | Exit::Io | Exit::Parse => 2,
            Exit::Precondition => 3,
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            Exit::Usage => "usage-error",
            Exit::Io => "io-error",
            Exit::Parse => "parse-error",
            Exit::Precondition => "precondition-error",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    kind: Exit,
    reason: String,
}

impl CliError {
    pub fn new(kind: Exit, reason: impl Into<String>) -> Self {
        Self {
            kind,
            reason: reason.into(),
        }
    }

    pub fn report(&self) -> ExitCode {
        let reason = self.reason.replace(['\n', '\r'], " ");
        eprintln!("{}: {}", self.kind.prefix(), reason.trim());
        ExitCode::from(self.kind.code())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::Parse { .. } => Exit::Parse,
            _ => Exit::Precondition,
        };
        Self::new(kind, e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn load(args: &InputArgs) -> CliResult<SampleSet> {
    let path = args.input.as_path();
    let samples = if path == Path::new("-") {
        let mut buf = Vec::new();
        io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| CliError::new(Exit::Io, format!("cannot read stdin: {e}")))?;
        parse_samples_csv(buf.as_slice(), args.has_header)?
    } else {
        let file = File::open(path)
            .map_err(|e| CliError::new(Exit::Io, format!("cannot open {}: {e}", path.display())))?;
        parse_samples_csv(file, args.has_header)?
    };
    match args.winsorise {
        Some(k) => Ok(winsorise(&samples, k)?),
        None => Ok(samples),
    }
}

fn optimizer_config(tree: &TreeArgs) -> OptimizerConfig {
    OptimizerConfig {
        starts: tree.starts,
        cycle_order: tree.cycle_order.clone(),
        ..OptimizerConfig::default()
    }
}

fn cycle_order(tree: &TreeArgs, dims: usize) -> Vec<usize> {
    tree.cycle_order.clone().unwrap_or_else(|| default_cycle_order(dims))
}

fn emit(text: &str, output: Option<&Path>) -> CliResult<()> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::new(Exit::Io, format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|()| out.flush())
                .map_err(|e| CliError::new(Exit::Io, format!("cannot write stdout: {e}")))
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::new(Exit::Io, format!("cannot encode JSON: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn estimate(a: &EstimateArgs) -> CliResult<()> {
    let tree_method = matches!(a.method, MethodArg::Equiprobable | MethodArg::Rotated);
    if !tree_method && (a.ensemble || a.tree.cycle_order.is_some()) {
        return Err(CliError::new(
            Exit::Usage,
            "--ensemble and --cycle-order apply only to the equiprobable and rotated methods",
        ));
    }
    if a.ensemble && a.tree.cycle_order.is_some() {
        return Err(CliError::new(Exit::Usage, "--ensemble and --cycle-order are mutually exclusive"));
    }

    let samples = load(&a.input)?;
    let d = samples.dims();
    let depth = a.tree.depth;
    let k = match a.bins_per_dim {
        Some(k) => k,
        None => 1usize
            .checked_shl(depth as u32)
            .filter(|_| depth < usize::BITS as usize)
            .ok_or_else(|| CliError::new(Exit::Precondition, format!("depth {depth} is too large")))?,
    };

    let estimate = match a.method {
        MethodArg::Naive => entropy_naive(&samples, k)?,
        MethodArg::Marginal => entropy_marginal_equiquantised(&samples, k)?,
        MethodArg::Equiprobable if a.ensemble => ensemble_estimate(&samples, depth, &cyclic_orders(d))?,
        MethodArg::Equiprobable => estimate_equiprobable(&samples, depth, &cycle_order(&a.tree, d))?,
        MethodArg::Rotated if a.ensemble => {
            let opt = optimise_rotation(&samples, depth, &optimizer_config(&a.tree))?;
            let frame = rotate(&samples, &opt.rotation)?;
            let mut e = ensemble_estimate(&frame, depth, &cyclic_orders(d))?;
            e.rotation = Some(opt.rotation);
            e
        }
        MethodArg::Rotated => entropy_rotated(&samples, depth, &optimizer_config(&a.tree))?,
    };
    emit(&to_json(&EstimateDocument::new(&estimate, &samples))?, None)
}

pub fn benchmark(a: &BenchmarkArgs) -> CliResult<()> {
    if a.trials < 2 {
        return Err(CliError::new(
            Exit::Precondition,
            format!("trials must be >= 2 for the bootstrap bound, got {}", a.trials),
        ));
    }
    let mut config = StudyConfig::new(a.n, a.bins, a.trials, a.seed);
    config.bootstrap_resamples = a.resamples;
    let study = run_study(&config)?;
    let text = match a.format {
        Format::Csv => study.to_csv(),
        Format::Json => to_json(&study)?,
    };
    emit(&text, a.output.as_deref())
}

pub fn dump_partition(a: &DumpArgs) -> CliResult<()> {
    let samples = load(&a.input)?;
    let depth = a.tree.depth;
    let doc = if a.rotate {
        let opt = optimise_rotation(&samples, depth, &optimizer_config(&a.tree))?;
        let rotation = RotationDocument {
            angle_rad: rotation_angle(&opt.rotation),
            mrp: opt.rotation.mrp(),
            barycentre: samples.barycentre().to_vec(),
        };
        let p = opt
            .evaluation
            .partition
            .as_ref()
            .expect("optimum carries its partition");
        PartitionDocument::new(p, Some(rotation))
    } else {
        let p = build_equiprobable(&samples, depth, &cycle_order(&a.tree, samples.dims()))?;
        PartitionDocument::new(&p, None)
    };
    emit(&to_json(&doc)?, None)
}
