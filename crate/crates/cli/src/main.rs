//! Command-line front end: batch subcommands over the quantization
//! library with reproducible text output.
//!
//! Exit codes: 0 success, 1 usage error, 2 a verification check out of
//! tolerance, 3 unsupported combination (e.g. a non-decaying weight on the
//! plain quadrature pipeline).

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::process::ExitCode;
use whiq::error::Error;
use whiq::fock::{outer, FockOperator, FockVector};
use whiq::io as wio;
use whiq::kernel::{position_kernel, XRule};
use whiq::portraits::{duality_check, lower_symbol, povm_diagnostic, wigner_map};
use whiq::quantize::{
    build_m_with_report, default_quadrature_grid, quantize, quantize_grid, tables_for, MOp, MPath,
    Pipeline, SymbolExpr,
};
use whiq::sft::{make_grid, GridScheme};
use whiq::star::star;
use whiq::weights::{Rep, WeightSpec};

#[derive(Parser)]
#[command(
    name = "whiq",
    version,
    about = "Weyl-Heisenberg integral quantization toolkit"
)]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PipelineArg {
    Auto,
    Quad,
    Poly,
    Kernel,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MPathArg {
    Closed,
    Quad,
    Regularized,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    C,
    Ctilde,
    D,
    Dtilde,
    A,
    Atilde,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RepArg {
    Z,
    Qp,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PortraitKind {
    Lower,
    Wigner,
}

#[derive(Subcommand)]
enum Command {
    /// Quantize a phase-space symbol into a truncated operator (CSV out)
    Quantize {
        #[arg(long)]
        weight: String,
        #[arg(long)]
        symbol: String,
        #[arg(long)]
        dim: usize,
        #[arg(long, value_enum, default_value_t = PipelineArg::Auto)]
        pipeline: PipelineArg,
        #[arg(long)]
        out: Option<String>,
    },
    /// Build the weight-transformed operator M (CSV out)
    Mop {
        #[arg(long)]
        weight: String,
        #[arg(long)]
        dim: usize,
        #[arg(long, value_enum, default_value_t = MPathArg::Closed)]
        path: MPathArg,
        #[arg(long)]
        out: Option<String>,
    },
    /// Emit a coefficient-family table sorted lexicographically
    Coeffs {
        #[arg(long)]
        weight: String,
        #[arg(long)]
        order: usize,
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long, value_enum, default_value_t = RepArg::Z)]
        rep: RepArg,
        #[arg(long)]
        out: Option<String>,
    },
    /// Star product of two polynomial symbols (CSV: m,n,re,im)
    Star {
        #[arg(long)]
        weight: String,
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        #[arg(long)]
        order: usize,
        #[arg(long)]
        out: Option<String>,
    },
    /// Phase-space portrait of an operator file on a cartesian grid
    Portrait {
        #[arg(long)]
        weight: Option<String>,
        /// operator file in the fock CSV format
        #[arg(long)]
        op: String,
        /// cartesian grid as L,M (half-width, points per axis)
        #[arg(long)]
        grid: String,
        #[arg(long, value_enum)]
        kind: PortraitKind,
        #[arg(long)]
        out: Option<String>,
    },
    /// Run verification suites and print a pass/fail table
    Verify {
        /// comma-separated: ccr,resolution,povm,duality,pipelines
        #[arg(long)]
        suite: String,
        #[arg(long)]
        weight: Option<String>,
        #[arg(long)]
        dim: usize,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::DivergenceRisk
        | Error::UnsupportedCombination(_)
        | Error::DistributionalKind
        | Error::UnsupportedGrid
        | Error::UnsupportedWeight(_)
        | Error::MissingTaylorData => 3,
        _ => 1,
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code_for(&e),
            message: e.to_string(),
        }
    }
}

fn writer(out: &Option<String>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| Failure {
            code: 1,
            message: format!("cannot create {path}: {e}"),
        })?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind::*;
            let _ = e.print();
            return match e.kind() {
                DisplayHelp | DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Some(n) = cli.threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            eprintln!("warning: thread pool already initialized");
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Quantize {
            weight,
            symbol,
            dim,
            pipeline,
            out,
        } => {
            let w = WeightSpec::parse(&weight)?;
            let f = SymbolExpr::parse(&symbol)?;
            let pl = match pipeline {
                PipelineArg::Auto => Pipeline::Auto,
                PipelineArg::Quad => Pipeline::Quadrature,
                PipelineArg::Poly => Pipeline::Poly,
                PipelineArg::Kernel => Pipeline::Kernel,
            };
            let (op, used) = quantize(&w, &f, dim, pl)?;
            eprintln!("pipeline: {used}");
            let mut wtr = writer(&out)?;
            wio::write_fock_matrix(&mut wtr, &op)?;
            Ok(())
        }
        Command::Mop {
            weight,
            dim,
            path,
            out,
        } => {
            let w = WeightSpec::parse(&weight)?;
            let mpath = match path {
                MPathArg::Closed => MPath::Closed,
                MPathArg::Quad => {
                    MPath::Quadrature(default_quadrature_grid(&w, &SymbolExpr::poly_qp(&[]), dim)?)
                }
                MPathArg::Regularized => {
                    MPath::Regularized(whiq::portraits::DAMPING_SCHEDULE.to_vec())
                }
            };
            let (m, report) = build_m_with_report(&w, dim, &mpath)?;
            if let Some(rep) = report {
                eprintln!(
                    "regularized: schedule {:?}, stage-to-stage norms {:?}",
                    rep.schedule, rep.step_norms
                );
            }
            let mut wtr = writer(&out)?;
            wio::write_fock_matrix(&mut wtr, &m)?;
            Ok(())
        }
        Command::Coeffs {
            weight,
            order,
            family,
            rep,
            out,
        } => {
            let w = WeightSpec::parse(&weight)?;
            let rep = match rep {
                RepArg::Z => Rep::Z,
                RepArg::Qp => Rep::Qp,
            };
            let tables = tables_for(&w, order, rep)?;
            let mut wtr = writer(&out)?;
            match family {
                FamilyArg::C => wio::write_coeff2(&mut wtr, &tables.c)?,
                FamilyArg::Ctilde => wio::write_coeff2(&mut wtr, &tables.c_inv)?,
                FamilyArg::D => wio::write_coeff4(&mut wtr, &tables.d)?,
                FamilyArg::Dtilde => wio::write_coeff4(&mut wtr, &tables.d_inv)?,
                FamilyArg::A => wio::write_coeff4(&mut wtr, &tables.a)?,
                FamilyArg::Atilde => wio::write_coeff4(&mut wtr, &tables.a_tilde)?,
            }
            Ok(())
        }
        Command::Star {
            weight,
            f,
            g,
            order,
            out,
        } => {
            let w = WeightSpec::parse(&weight)?;
            let fsym = SymbolExpr::parse(&f)?;
            let gsym = SymbolExpr::parse(&g)?;
            let rep = match (&fsym, &gsym) {
                (SymbolExpr::PolyZ(_), SymbolExpr::PolyZ(_)) => Rep::Z,
                _ => Rep::Qp,
            };
            let ft = fsym.as_poly(rep)?;
            let gt = gsym.as_poly(rep)?;
            let tables = tables_for(&w, order.max(2), rep)?;
            let expansion = star(&tables.a_tilde, &ft, &gt, order)?;
            if !expansion.exact {
                eprintln!(
                    "truncated at total coefficient order {}; first omitted order {}",
                    expansion.order_cap, expansion.residual_order
                );
            }
            let mut wtr = writer(&out)?;
            wio::write_coeff2(&mut wtr, &expansion.result)?;
            Ok(())
        }
        Command::Portrait {
            weight,
            op,
            grid,
            kind,
            out,
        } => {
            let file = File::open(&op).map_err(|e| Failure {
                code: 1,
                message: format!("cannot open {op}: {e}"),
            })?;
            let a = wio::read_fock_matrix(&mut BufReader::new(file))?;
            let (l, m) = grid.split_once(',').ok_or(Failure {
                code: 1,
                message: "grid must be L,M".into(),
            })?;
            let l: f64 = l.trim().parse().map_err(|e| Failure {
                code: 1,
                message: format!("bad L: {e}"),
            })?;
            let m: usize = m.trim().parse().map_err(|e| Failure {
                code: 1,
                message: format!("bad M: {e}"),
            })?;
            let grid = make_grid(GridScheme::CartesianUniform {
                half_width: l,
                points: m,
            })?;
            let field = match kind {
                PortraitKind::Wigner => wigner_map(&a, &grid)?,
                PortraitKind::Lower => {
                    let wspec = weight.as_deref().ok_or(Failure {
                        code: 1,
                        message: "--kind lower needs --weight".into(),
                    })?;
                    let w = WeightSpec::parse(wspec)?;
                    let mop = MOp::new(&w, a.dim(), &MPath::Closed)?;
                    lower_symbol(&mop, &a, &grid)?
                }
            };
            if field.radius_warning {
                eprintln!(
                    "warning: grid reaches |z| = {:.2} beyond the accuracy radius {:.2} for dim {}",
                    grid.max_radius(),
                    whiq::portraits::l_safe(a.dim()),
                    a.dim()
                );
            }
            let mut wtr = writer(&out)?;
            wio::write_field(&mut wtr, &field)?;
            Ok(())
        }
        Command::Verify { suite, weight, dim } => verify(&suite, weight.as_deref(), dim),
    }
}

struct CheckRow {
    name: String,
    pass: bool,
    detail: String,
}

fn verify(suites: &str, weight: Option<&str>, dim: usize) -> Result<(), Failure> {
    let mut rows: Vec<CheckRow> = Vec::new();
    for suite in suites.split(',').map(str::trim) {
        match suite {
            "ccr" => verify_ccr(weight, dim, &mut rows)?,
            "resolution" => verify_resolution(weight, dim, &mut rows)?,
            "povm" => verify_povm(weight, dim, &mut rows)?,
            "duality" => verify_duality(weight, dim, &mut rows)?,
            "pipelines" => verify_pipelines(weight, dim, &mut rows)?,
            other => {
                return Err(Failure {
                    code: 1,
                    message: format!("unknown suite {other:?}"),
                })
            }
        }
    }
    let mut all_pass = true;
    for row in &rows {
        let status = if row.pass { "pass" } else { "FAIL" };
        println!("{status}  {:<44} {}", row.name, row.detail);
        all_pass &= row.pass;
    }
    if all_pass {
        Ok(())
    } else {
        Err(Failure {
            code: 2,
            message: "verification out of tolerance".into(),
        })
    }
}

fn weight_list(weight: Option<&str>) -> Result<Vec<WeightSpec>, Failure> {
    Ok(match weight {
        Some(s) => vec![WeightSpec::parse(s)?],
        None => vec![
            WeightSpec::parse("ww")?,
            WeightSpec::parse("cg:-1")?,
            WeightSpec::parse("cg:-0.5")?,
            WeightSpec::parse("cg:0.3")?,
            WeightSpec::parse("bj")?,
            WeightSpec::parse("gauss:1,2")?,
        ],
    })
}

fn verify_ccr(weight: Option<&str>, dim: usize, rows: &mut Vec<CheckRow>) -> Result<(), Failure> {
    for w in weight_list(weight)? {
        let tables = tables_for(&w, 4, Rep::Qp)?;
        let q = SymbolExpr::parse("q")?.as_poly(Rep::Qp)?;
        let p = SymbolExpr::parse("p")?.as_poly(Rep::Qp)?;
        let aq = whiq::quantize::quantize_poly_qp(&tables, &q, dim)?;
        let ap = whiq::quantize::quantize_poly_qp(&tables, &p, dim)?;
        let comm = aq.commutator(&ap);
        let want = FockOperator::identity(dim).scale(Complex64::new(0.0, 1.0));
        let err = comm.max_abs_diff_on(&want, dim / 2);
        rows.push(CheckRow {
            name: format!("ccr [{w}] dim={dim}"),
            pass: err < 1e-10,
            detail: format!("max entry error {err:.3e} (tol 1e-10)"),
        });
    }
    Ok(())
}

fn verify_resolution(
    weight: Option<&str>,
    dim: usize,
    rows: &mut Vec<CheckRow>,
) -> Result<(), Failure> {
    let w = match weight {
        Some(s) => WeightSpec::parse(s)?,
        None => WeightSpec::parse("cg:-0.5")?,
    };
    let one = SymbolExpr::parse("1")?;
    let grid = default_quadrature_grid(&w, &one, dim)?;
    let a = quantize_grid(&w, &one, dim, &grid)?;
    let err = a.max_abs_diff_on(&FockOperator::identity(dim), dim / 2);
    rows.push(CheckRow {
        name: format!("resolution [{w}] dim={dim}"),
        pass: err < 1e-6,
        detail: format!("unit-symbol residual {err:.3e} (tol 1e-6)"),
    });
    Ok(())
}

fn verify_povm(weight: Option<&str>, dim: usize, rows: &mut Vec<CheckRow>) -> Result<(), Failure> {
    let list = match weight {
        Some(s) => vec![WeightSpec::parse(s)?],
        None => vec![
            WeightSpec::parse("cg:-1")?,
            WeightSpec::parse("cg:-2")?,
            WeightSpec::parse("ww")?,
        ],
    };
    for w in list {
        let grid = default_quadrature_grid(&w, &SymbolExpr::parse("1")?, dim).or_else(|_| {
            make_grid(GridScheme::TensorGaussHermite {
                sigma_q: 1.2,
                sigma_p: 1.2,
                order: 80,
            })
        })?;
        let report = povm_diagnostic(&w, dim, &grid)?;
        let expected = match w.kind() {
            whiq::weights::WeightKind::CahillGlauber(s) if s.im == 0.0 => Some(s.re <= -1.0),
            whiq::weights::WeightKind::Constant => Some(false),
            _ => None,
        };
        let pass = match expected {
            Some(e) => report.positive == e,
            None => true,
        };
        let res = report
            .resolution_residual
            .map_or("n/a".to_string(), |r| format!("{r:.3e}"));
        rows.push(CheckRow {
            name: format!("povm [{w}] dim={dim}"),
            pass,
            detail: format!(
                "min eig {:.3e}, positive: {}, resolution residual {res}",
                report.min_eigenvalue, report.positive
            ),
        });
    }
    Ok(())
}

fn verify_duality(
    weight: Option<&str>,
    dim: usize,
    rows: &mut Vec<CheckRow>,
) -> Result<(), Failure> {
    let cases: Vec<(WeightSpec, SymbolExpr, usize)> = match weight {
        Some(s) => vec![(
            WeightSpec::parse(s)?,
            SymbolExpr::parse("q^2")?,
            dim.max(128),
        )],
        None => vec![
            (
                WeightSpec::parse("cg:-1")?,
                SymbolExpr::parse("1")?,
                dim.max(64),
            ),
            (
                WeightSpec::parse("ww")?,
                SymbolExpr::parse("q^2")?,
                dim.max(128),
            ),
            (
                WeightSpec::parse("cg:-1")?,
                SymbolExpr::parse("z*zbar")?,
                dim.max(64),
            ),
        ],
    };
    let grid = make_grid(GridScheme::CartesianUniform {
        half_width: 4.4,
        points: 48,
    })?;
    for (w, f, d) in cases {
        let ground = outer(
            &FockVector::basis_state(0, d),
            &FockVector::basis_state(0, d),
        );
        let rep = duality_check(&w, &f, &ground, &grid)?;
        rows.push(CheckRow {
            name: format!("duality [{w}] dim={d}"),
            pass: rep.residual < 1e-5,
            detail: format!(
                "lhs {:.8}, rhs {:.8}, residual {:.3e} (tol 1e-5)",
                rep.lhs.re, rep.rhs.re, rep.residual
            ),
        });
    }
    Ok(())
}

fn verify_pipelines(
    weight: Option<&str>,
    dim: usize,
    rows: &mut Vec<CheckRow>,
) -> Result<(), Failure> {
    let w = match weight {
        Some(s) => WeightSpec::parse(s)?,
        None => WeightSpec::parse("cg:-0.5")?,
    };
    let symbols = ["q", "p", "q^2", "p^2", "q*p", "q^2*p^2"];
    let block = dim / 2;
    let fs: Vec<SymbolExpr> = symbols
        .iter()
        .map(|t| SymbolExpr::parse(t))
        .collect::<Result<_, _>>()?;
    let grid = default_quadrature_grid(&w, &fs[0], dim)?;
    let quads = whiq::quantize::quantize_grid_many(&w, &fs, dim, &grid)?;
    let tables_qp = tables_for(&w, 8, Rep::Qp)?;
    let tables_z = tables_for(&w, 8, Rep::Z)?;
    let rule = XRule::gauss(2 * dim + 48)?;
    for (text, (f, quad)) in symbols.iter().zip(fs.iter().zip(&quads)) {
        let poly_qp = whiq::quantize::quantize_poly_qp(&tables_qp, &f.as_poly(Rep::Qp)?, dim)?;
        let poly_z = whiq::quantize::quantize_poly_z(&tables_z, &f.as_poly(Rep::Z)?, dim)?;
        let kern = position_kernel(&w, f, dim, &rule)?.op;
        let ops = [
            ("quad", quad),
            ("poly-z", &poly_z),
            ("poly-qp", &poly_qp),
            ("kernel", &kern),
        ];
        let mut worst = 0.0f64;
        for i in 0..ops.len() {
            for j in (i + 1)..ops.len() {
                worst = worst.max(ops[i].1.max_abs_diff_on(ops[j].1, block));
            }
        }
        rows.push(CheckRow {
            name: format!("pipelines [{w}] {text} dim={dim}"),
            pass: worst < 1e-5,
            detail: format!("worst pairwise deviation {worst:.3e} (tol 1e-5)"),
        });
    }
    Ok(())
}
