use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Mutex;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use softpress::legendre::{
    conjugate_on_grid, phase_transition_scan, LegendreError, PressureSamples, ScanOptions,
};
use softpress::monomer_dimer::{
    baxter_row_with, entropy_2d_with, md_digraph, pbar1_md_with, DimerWeights, MdError, RingLadder,
    BAXTER_STEP, BAXTER_S_INV, SURFACE_STEP,
};
use softpress::pressure1d::{density_entropy_1d_with, pressure_1d_with, PressureError};
use softpress::soft::{Enumerator, SoftError};
use softpress::spectral::SpectralError;
use softpress::transfer2d::{sandwich_bounds_with, strip_upper_bound_with, TransferError};
use softpress::{BoxShape, Digraph, DigraphTuple, PowerOptions, WeightVector};

mod format;

use format::{num, Table};

#[derive(Parser)]
#[command(
    name = "softpress",
    version,
    about = "Pressure of nearest-neighbor subshifts and the monomer-dimer model"
)]
struct Cli {
    /// Worker threads; SOFT_PRESS_THREADS is used when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Relative tolerance of the power iteration.
    #[arg(long, global = true, default_value_t = 1e-13)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 200_000)]
    max_iter: usize,
    /// Write output here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact 1D pressure, color frequencies and density entropy.
    Pressure1d {
        #[command(flatten)]
        source: DigraphSource,
        /// Axis of the digraph tuple to use (1-based).
        #[arg(long, default_value_t = 1)]
        axis: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u: Vec<f64>,
    },
    /// Ring sandwich bounds for a 2D digraph pair, optionally with a strip bound.
    Bounds2d {
        #[command(flatten)]
        source: DigraphSource,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        r: usize,
        #[arg(long, default_value_t = 4)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        q: usize,
        /// Also report the free-strip upper bound of this height.
        #[arg(long)]
        strip: Option<usize>,
    },
    /// Monomer-dimer bounds, density and entropy along v = (log s, log s).
    MdBaxter {
        /// Values of 1/s; the 18 classical values by default.
        #[arg(long, value_delimiter = ',')]
        s_inv: Option<Vec<f64>>,
        #[arg(long, default_value_t = 12)]
        m_upper: usize,
        /// Lower-bound ring sizes `hi,lo`.
        #[arg(long, value_delimiter = ',', default_values_t = [12, 10])]
        m_lower: Vec<usize>,
        #[arg(long, default_value_t = BAXTER_STEP)]
        t: f64,
        /// Use the large ring sizes 16/14 and 17/16 per row.
        #[arg(long)]
        production: bool,
    },
    /// Pressure, dimer densities and entropy on a v₁ × v₂ grid.
    MdSurface {
        #[arg(long, default_value_t = 18)]
        grid: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-1.61, 4.0])]
        range: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        m: usize,
        #[arg(long, default_value_t = SURFACE_STEP)]
        t: f64,
    },
    /// Grid Legendre conjugate of a 1D pressure; the last weight is held at 0.
    Conjugate {
        #[command(flatten)]
        source: DigraphSource,
        #[arg(long, default_value_t = 1)]
        axis: usize,
        #[arg(long, allow_hyphen_values = true, default_value_t = -8.0)]
        grid_min: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 8.0)]
        grid_max: f64,
        #[arg(long, default_value_t = 0.01)]
        grid_step: f64,
        /// Density vectors, one per flag, components separated by commas.
        #[arg(long = "p", required = true)]
        densities: Vec<String>,
    },
    /// Scan a segment for jumps of the directional derivative of a 1D pressure.
    Scan {
        #[command(flatten)]
        source: DigraphSource,
        #[arg(long, default_value_t = 1)]
        axis: usize,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        from: Vec<f64>,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        to: Vec<f64>,
        #[arg(long, default_value_t = 64)]
        steps: usize,
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        /// Defaults to 20·h.
        #[arg(long)]
        gap_tol: Option<f64>,
    },
    /// Brute-force grand partition function of a box.
    Oracle {
        #[command(flatten)]
        source: DigraphSource,
        #[arg(long = "box", value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        /// Periodic axes (1-based).
        #[arg(long, value_delimiter = ',')]
        periodic: Vec<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u: Vec<f64>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct DigraphSource {
    /// Digraph tuple as JSON: {"n", "d", "axes": [[[p, q], ...], ...]}.
    #[arg(long)]
    digraph: Option<PathBuf>,
    /// hard-core, two-loops, hard-squares or monomer-dimer.
    #[arg(long)]
    builtin: Option<String>,
}

impl DigraphSource {
    fn load(&self) -> Result<DigraphTuple, Failure> {
        if let Some(path) = &self.digraph {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Config)?;
            return DigraphTuple::from_json_str(&text).map_err(|e| Failure::Config(e.into()));
        }
        let name = self.builtin.as_deref().unwrap_or_default();
        let tuple = match name {
            "hard-core" => DigraphTuple::new(vec![Digraph::hard_core()]),
            "two-loops" => DigraphTuple::new(vec![
                Digraph::from_edges(2, &[(1, 1), (2, 2)]).expect("valid")
            ]),
            "hard-squares" => DigraphTuple::isotropic(Digraph::hard_core(), 2),
            "monomer-dimer" => return md_digraph(2).map_err(|e| Failure::Config(e.into())),
            other => return Err(config(format!("unknown builtin digraph {other:?}"))),
        };
        tuple.map_err(|e| Failure::Config(e.into()))
    }
}

/// Exit 2 for bad input, 3 when the eigensolver gives up, 1 otherwise.
enum Failure {
    Config(anyhow::Error),
    NoConvergence(anyhow::Error),
    Io(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::NoConvergence(_) => 3,
            Failure::Io(_) => 1,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::NoConvergence(e) | Failure::Io(e) => e,
        }
    }
}

fn config(msg: String) -> Failure {
    Failure::Config(anyhow!(msg))
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.into())
    }
}

fn spectral_failure(e: &SpectralError) -> bool {
    matches!(e, SpectralError::NoConvergence { .. })
}

fn pressure_failure(e: &PressureError) -> bool {
    matches!(e, PressureError::Spectral(s) if spectral_failure(s))
}

impl From<PressureError> for Failure {
    fn from(e: PressureError) -> Self {
        if pressure_failure(&e) {
            Failure::NoConvergence(e.into())
        } else {
            Failure::Config(e.into())
        }
    }
}

impl From<TransferError> for Failure {
    fn from(e: TransferError) -> Self {
        let stuck = match &e {
            TransferError::Spectral(s) => spectral_failure(s),
            TransferError::Pressure(p) => pressure_failure(p),
            _ => false,
        };
        if stuck {
            Failure::NoConvergence(e.into())
        } else {
            Failure::Config(e.into())
        }
    }
}

impl From<MdError> for Failure {
    fn from(e: MdError) -> Self {
        if matches!(&e, MdError::Spectral(s) if spectral_failure(s)) {
            Failure::NoConvergence(e.into())
        } else {
            Failure::Config(e.into())
        }
    }
}

impl From<SoftError> for Failure {
    fn from(e: SoftError) -> Self {
        Failure::Config(e.into())
    }
}

impl From<LegendreError> for Failure {
    fn from(e: LegendreError) -> Self {
        Failure::Config(e.into())
    }
}

fn weights(u: &[f64], n: usize) -> Result<WeightVector, Failure> {
    if u.is_empty() {
        return Ok(WeightVector::zeros(n));
    }
    if u.len() != n {
        return Err(config(format!(
            "--u has {} entries, the digraph has {n} colors",
            u.len()
        )));
    }
    Ok(WeightVector::new(u.to_vec())?)
}

fn axis_graph(tuple: &DigraphTuple, axis: usize) -> Result<Digraph, Failure> {
    if axis == 0 || axis > tuple.d() {
        return Err(config(format!("axis {axis} outside 1..={}", tuple.d())));
    }
    Ok(tuple.axis(axis - 1).clone())
}

fn parse_vector(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number {t:?}"))
        })
        .collect::<Result<_, _>>()
        .map_err(Failure::Config)
}

/// Writes the successful prefix of `rows`, then reports the first failure.
fn emit_rows<W: Write, E>(
    mut table: Table<W>,
    rows: Vec<Result<Vec<String>, E>>,
) -> Result<(), Failure>
where
    Failure: From<E>,
{
    for row in rows {
        match row {
            Ok(cells) => table.row(&cells)?,
            Err(e) => {
                table.finish()?;
                return Err(e.into());
            }
        }
    }
    table.finish()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let threads = match cli.threads {
        Some(n) => Some(n),
        None => match std::env::var("SOFT_PRESS_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| config(format!("SOFT_PRESS_THREADS={v:?} is not a count")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Io(e.into()))?;
    }
    if !(cli.tol > 0.0) || cli.max_iter == 0 {
        return Err(config("--tol and --max-iter must be positive".into()));
    }
    let opts = PowerOptions {
        tol: cli.tol,
        max_iter: cli.max_iter,
        ..PowerOptions::default()
    };
    let out: Box<dyn Write> = match &cli.output {
        Some(path) => Box::new(BufWriter::new(
            File::create(path)
                .with_context(|| format!("creating {}", path.display()))
                .map_err(Failure::Io)?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };

    match cli.command {
        Command::Pressure1d { source, axis, u } => {
            let tuple = source.load()?;
            let graph = axis_graph(&tuple, axis)?;
            let n = graph.n();
            let u = weights(&u, n)?;
            let pressure = pressure_1d_with(&graph, &u, &opts)?;
            let mut header = vec!["pressure".to_string(), "entropy".to_string()];
            header.extend((1..=n).map(|i| format!("p{i}")));
            let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            let mut cells = vec![num(pressure)];
            match density_entropy_1d_with(&graph, &u, &opts) {
                Ok(rec) => {
                    cells.push(num(rec.h));
                    cells.extend(rec.p.iter().map(|&p| num(p)));
                }
                Err(PressureError::Reducible { .. } | PressureError::EmptySoft) => {
                    cells.extend(std::iter::repeat_n(String::new(), n + 1));
                }
                Err(e) => return Err(e.into()),
            }
            let mut table = Table::new(out, &header)?;
            table.row(&cells)?;
            table.finish()?;
        }
        Command::Bounds2d {
            source,
            u,
            r,
            p,
            q,
            strip,
        } => {
            let tuple = source.load()?;
            let u = weights(&u, tuple.n())?;
            if r == 0 || p == 0 {
                return Err(config("--r and --p must be at least 1".into()));
            }
            let est = sandwich_bounds_with(&tuple, r, p, q, &u, &opts)?;
            let mut header = vec!["lower", "upper", "value", "r", "p", "q"];
            let mut cells = vec![
                num(est.lower),
                num(est.upper),
                num(est.value),
                r.to_string(),
                p.to_string(),
                q.to_string(),
            ];
            if let Some(m2) = strip {
                header.push("strip_upper");
                cells.push(num(strip_upper_bound_with(&tuple, m2, &u, &opts)?));
            }
            let mut table = Table::new(out, &header)?;
            table.row(&cells)?;
            table.finish()?;
        }
        Command::MdBaxter {
            s_inv,
            m_upper,
            m_lower,
            t,
            production,
        } => {
            let s_inv = s_inv.unwrap_or_else(|| BAXTER_S_INV.to_vec());
            if s_inv.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(config("every --s-inv value must be positive".into()));
            }
            if !(t > 0.0) {
                return Err(config("--t must be positive".into()));
            }
            let &[m_lo_hi, m_lo_lo] = m_lower.as_slice() else {
                return Err(config("--m-lower takes two ring sizes hi,lo".into()));
            };
            let desk = RingLadder {
                m_upper,
                m_lo_hi,
                m_lo_lo,
            };
            let ladders: Vec<RingLadder> = s_inv
                .iter()
                .map(|&si| {
                    if production {
                        RingLadder::production(si)
                    } else {
                        desk
                    }
                })
                .collect();
            for l in &ladders {
                l.validate()?;
            }
            let rows: Vec<Result<Vec<String>, MdError>> = s_inv
                .par_iter()
                .zip(&ladders)
                .map(|(&si, &ladder)| {
                    let row = baxter_row_with(1.0 / si, ladder, t, &opts)?;
                    Ok(vec![
                        num(si),
                        num(row.v),
                        num(row.lower),
                        num(row.upper),
                        num(row.p_total),
                        num(row.entropy),
                        row.m_upper.to_string(),
                        row.m_lo_hi.to_string(),
                        row.m_lo_lo.to_string(),
                        num(row.t),
                    ])
                })
                .collect();
            let header = [
                "s_inv", "v", "lower", "upper", "p_total", "entropy", "m_upper", "m_lo_hi",
                "m_lo_lo", "t",
            ];
            emit_rows(Table::new(out, &header)?, rows)?;
        }
        Command::MdSurface { grid, range, m, t } => {
            let &[lo, hi] = range.as_slice() else {
                return Err(config("--range takes two values lo,hi".into()));
            };
            if grid < 2 || !(lo < hi) || !(t > 0.0) {
                return Err(config("need --grid >= 2, lo < hi and --t > 0".into()));
            }
            if m == 0 || m > softpress::monomer_dimer::MAX_RING {
                return Err(config(format!(
                    "--m must be in 1..={}",
                    softpress::monomer_dimer::MAX_RING
                )));
            }
            let axis = softpress::legendre::linspace(lo, hi, grid);
            let points: Vec<(f64, f64)> = axis
                .iter()
                .flat_map(|&a| axis.iter().map(move |&b| (a, b)))
                .collect();
            let rows: Vec<Result<Vec<String>, MdError>> = points
                .par_iter()
                .map(|&(v1, v2)| {
                    let w = DimerWeights::new(v1, v2)?;
                    let pbar = pbar1_md_with(m, &w, &opts)?;
                    let rec = entropy_2d_with(m, &w, t, &opts)?;
                    Ok(vec![
                        num(v1),
                        num(v2),
                        num(pbar / m as f64),
                        num(rec.p[0]),
                        num(rec.p[1]),
                        num(rec.h),
                        m.to_string(),
                        num(t),
                    ])
                })
                .collect();
            let header = ["v1", "v2", "pbar_over_m", "p1", "p2", "entropy", "m", "t"];
            emit_rows(Table::new(out, &header)?, rows)?;
        }
        Command::Conjugate {
            source,
            axis,
            grid_min,
            grid_max,
            grid_step,
            densities,
        } => {
            let tuple = source.load()?;
            let graph = axis_graph(&tuple, axis)?;
            let n = graph.n();
            if !(grid_max > grid_min) || !(grid_step > 0.0) {
                return Err(config(
                    "need --grid-max > --grid-min and --grid-step > 0".into(),
                ));
            }
            let per_axis = ((grid_max - grid_min) / grid_step + 1e-9).floor() as usize + 1;
            let total = (per_axis as f64).powi(n as i32 - 1);
            if total > 4e6 {
                return Err(config(format!(
                    "{total} grid points exceed the limit of 4e6"
                )));
            }
            let ps: Vec<Vec<f64>> = densities
                .iter()
                .map(|d| parse_vector(d))
                .collect::<Result<_, _>>()?;
            for p in &ps {
                if p.len() != n {
                    return Err(config(format!("density {p:?} needs {n} entries")));
                }
                if (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(config(format!("density {p:?} must sum to 1")));
                }
            }
            let line: Vec<f64> = (0..per_axis)
                .map(|i| grid_min + i as f64 * grid_step)
                .collect();
            let mut axes = vec![line; n - 1];
            axes.push(vec![0.0]);
            let failure = Mutex::new(None);
            let samples = PressureSamples::on_grid("pressure1d", &axes, |u| {
                let w = WeightVector::new(u.to_vec()).expect("grid is finite");
                pressure_1d_with(&graph, &w, &opts).unwrap_or_else(|e| {
                    failure.lock().expect("lock").get_or_insert(e);
                    f64::NAN
                })
            });
            if let Some(e) = failure.into_inner().expect("lock") {
                return Err(e.into());
            }
            let samples = samples?;
            let mut header: Vec<String> = (1..=n).map(|i| format!("p{i}")).collect();
            header.extend(["conjugate", "entropy", "at_grid_boundary"].map(String::from));
            let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            let mut table = Table::new(out, &header)?;
            for p in &ps {
                let c = conjugate_on_grid(&samples, p)?;
                let mut cells: Vec<String> = p.iter().map(|&x| num(x)).collect();
                cells.extend([num(c.value), num(-c.value), c.at_grid_boundary.to_string()]);
                table.row(&cells)?;
            }
            table.finish()?;
        }
        Command::Scan {
            source,
            axis,
            from,
            to,
            steps,
            h,
            gap_tol,
        } => {
            let tuple = source.load()?;
            let graph = axis_graph(&tuple, axis)?;
            if from.len() != graph.n() || to.len() != graph.n() {
                return Err(config(format!(
                    "--from and --to need {} entries",
                    graph.n()
                )));
            }
            let mut scan = ScanOptions::new(steps, h);
            if let Some(g) = gap_tol {
                scan.gap_tol = g;
            }
            let failure = Mutex::new(None);
            let kinks = phase_transition_scan(
                |u| {
                    let w = WeightVector::new(u.to_vec()).expect("segment is finite");
                    pressure_1d_with(&graph, &w, &opts).unwrap_or_else(|e| {
                        failure.lock().expect("lock").get_or_insert(e);
                        f64::NAN
                    })
                },
                &from,
                &to,
                scan,
            );
            if let Some(e) = failure.into_inner().expect("lock") {
                return Err(e.into());
            }
            let kinks = kinks?;
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, &kinks).map_err(|e| Failure::Io(e.into()))?;
            writeln!(out)?;
            out.flush()?;
        }
        Command::Oracle {
            source,
            dims,
            periodic,
            u,
        } => {
            let tuple = source.load()?;
            let u = weights(&u, tuple.n())?;
            let shape = BoxShape::new(dims)?;
            let periodic: Vec<usize> = periodic
                .iter()
                .map(|&k| {
                    if k == 0 || k > tuple.d() {
                        Err(config(format!(
                            "periodic axis {k} outside 1..={}",
                            tuple.d()
                        )))
                    } else {
                        Ok(k - 1)
                    }
                })
                .collect::<Result<_, _>>()?;
            let census = Enumerator::default().census(&tuple, &shape, &periodic)?;
            let log_z = census.log_partition(&u)?;
            let mut table = Table::new(out, &["colorings", "log_z", "log_z_over_vol"])?;
            table.row(&[
                census.total.to_string(),
                num(log_z),
                num(log_z / shape.vol() as f64),
            ])?;
            table.finish()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
