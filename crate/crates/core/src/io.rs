//! Text exchange formats: operators and vectors as sparse CSV in the
//! number basis, fields as per-node CSV, coefficient tables as sorted
//! index/value rows. All numbers carry 17 significant digits so identical
//! runs emit identical bytes.

use crate::coeffs::CoeffTable4;
use crate::error::{Error, Result};
use crate::fock::{FockOperator, FockVector};
use crate::sft::{make_grid, GridScheme, PhaseField, PhaseGrid};
use crate::weights::CoeffTable2;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::io::{BufRead, Write};
use std::sync::Arc;

/// 17 significant digits, with negative zero canonicalized away.
pub fn fmt17(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

pub fn write_fock_matrix(out: &mut impl Write, op: &FockOperator) -> Result<()> {
    writeln!(out, "# fock dim={}", op.dim())?;
    for row in 0..op.dim() {
        for col in 0..op.dim() {
            let v = op.entry(row, col);
            if v != Complex64::ZERO {
                writeln!(out, "{row},{col},{},{}", fmt17(v.re), fmt17(v.im))?;
            }
        }
    }
    Ok(())
}

pub fn write_fock_vector(out: &mut impl Write, v: &FockVector) -> Result<()> {
    writeln!(out, "# fock dim={}", v.dim())?;
    for (index, amp) in v.entries.iter().enumerate() {
        if *amp != Complex64::ZERO {
            writeln!(out, "{index},{},{}", fmt17(amp.re), fmt17(amp.im))?;
        }
    }
    Ok(())
}

pub fn read_fock_vector(input: &mut impl BufRead) -> Result<FockVector> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    if !header.starts_with("# fock") {
        return Err(Error::Format("expected `# fock dim=<N>` header".into()));
    }
    let fields = parse_header_fields(&header)?;
    let dim: usize = header_get(&fields, "dim")?
        .parse()
        .map_err(|e| Error::Format(format!("bad dim: {e}")))?;
    let mut entries = vec![Complex64::ZERO; dim];
    for line in input.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = t.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Format("vector rows need index,re,im".into()));
        }
        let index: usize = parts[0]
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("{e}")))?;
        if index >= dim {
            return Err(Error::Format(format!("index {index} outside dim {dim}")));
        }
        let re: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("{e}")))?;
        let im: f64 = parts[2]
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("{e}")))?;
        entries[index] = Complex64::new(re, im);
    }
    Ok(FockVector { entries, tail: 0.0 })
}

fn parse_header_fields(line: &str) -> Result<Vec<(String, String)>> {
    Ok(line
        .trim_start_matches('#')
        .split_whitespace()
        .filter_map(|tok| {
            tok.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
        })
        .collect())
}

fn header_get<'a>(fields: &'a [(String, String)], key: &str) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Format(format!("missing {key}= in header")))
}

pub fn read_fock_matrix(input: &mut impl BufRead) -> Result<FockOperator> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    if !header.starts_with("# fock") {
        return Err(Error::Format("expected `# fock dim=<N>` header".into()));
    }
    let fields = parse_header_fields(&header)?;
    let dim: usize = header_get(&fields, "dim")?
        .parse()
        .map_err(|e| Error::Format(format!("bad dim: {e}")))?;
    let mut mat = DMatrix::<Complex64>::zeros(dim, dim);
    for (ln, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = t.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::Format(format!(
                "line {}: need row,col,re,im",
                ln + 2
            )));
        }
        let row: usize = parts[0]
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("{e}")))?;
        let col: usize = parts[1]
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("{e}")))?;
        let re: f64 = parts[2]
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("{e}")))?;
        let im: f64 = parts[3]
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("{e}")))?;
        if row >= dim || col >= dim {
            return Err(Error::Format(format!(
                "index ({row},{col}) outside dim {dim}"
            )));
        }
        mat[(row, col)] = Complex64::new(re, im);
    }
    FockOperator::from_matrix(mat)
}

fn scheme_header(scheme: &GridScheme) -> String {
    match scheme {
        GridScheme::CartesianUniform { half_width, points } => {
            format!("# grid scheme=cartesian L={half_width} M={points}")
        }
        GridScheme::PolarGaussLaguerre { radial, angular } => {
            format!("# grid scheme=polar-gl R={radial} A={angular}")
        }
        GridScheme::TensorGaussHermite {
            sigma_q,
            sigma_p,
            order,
        } => format!("# grid scheme=gauss-hermite SQ={sigma_q} SP={sigma_p} N={order}"),
    }
}

pub fn write_field(out: &mut impl Write, field: &PhaseField) -> Result<()> {
    writeln!(out, "{}", scheme_header(field.grid().scheme()))?;
    for (pt, v) in field.grid().nodes().iter().zip(field.values()) {
        writeln!(
            out,
            "{},{},{},{}",
            fmt17(pt.q),
            fmt17(pt.p),
            fmt17(v.re),
            fmt17(v.im)
        )?;
    }
    Ok(())
}

/// Reads a field written by `write_field`. Only cartesian grids can be
/// reconstructed from the header.
pub fn read_field(input: &mut impl BufRead) -> Result<(Arc<PhaseGrid>, PhaseField)> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    if !header.starts_with("# grid") {
        return Err(Error::Format("expected `# grid ...` header".into()));
    }
    let fields = parse_header_fields(&header)?;
    if header_get(&fields, "scheme")? != "cartesian" {
        return Err(Error::Format(
            "only cartesian field files can be reloaded".into(),
        ));
    }
    let half_width: f64 = header_get(&fields, "L")?
        .parse()
        .map_err(|e| Error::Format(format!("bad L: {e}")))?;
    let points: usize = header_get(&fields, "M")?
        .parse()
        .map_err(|e| Error::Format(format!("bad M: {e}")))?;
    let grid = make_grid(GridScheme::CartesianUniform { half_width, points })?;
    let mut values = Vec::with_capacity(grid.len());
    for line in input.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = t.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::Format("field rows need q,p,re,im".into()));
        }
        let re: f64 = parts[2]
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("{e}")))?;
        let im: f64 = parts[3]
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("{e}")))?;
        values.push(Complex64::new(re, im));
    }
    let field = PhaseField::from_values(grid.clone(), values)?;
    Ok((grid, field))
}

pub fn write_coeff2(out: &mut impl Write, t: &CoeffTable2) -> Result<()> {
    for (&(i, ibar), v) in t.iter() {
        writeln!(out, "{i},{ibar},{},{}", fmt17(v.re), fmt17(v.im))?;
    }
    Ok(())
}

pub fn write_coeff4(out: &mut impl Write, t: &CoeffTable4) -> Result<()> {
    for (&(i, ibar, j, jbar), v) in t.iter() {
        writeln!(out, "{i},{ibar},{j},{jbar},{},{}", fmt17(v.re), fmt17(v.im))?;
    }
    Ok(())
}
