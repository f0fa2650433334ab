//! Field serialization: CSV, JSON and a little-endian binary dump.
//!
//! All formats carry spectral coefficients in monotone order. CSV numbers
//! use `{:.16e}` (17 significant digits); JSON numbers use the shortest
//! representation that round-trips.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dkg::{HalfWaveState, SpinorField};
use crate::spectral::{ComplexScalarField, GridSpec, Representation};
use crate::{Error, Result};

pub const BINARY_MAGIC: &[u8; 8] = b"DKGFLD01";

/// Full-precision text form of a float.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub k: i64,
    pub xi: f64,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldJson {
    pub n: usize,
    pub length: f64,
    pub rep: Representation,
    pub modes: Vec<ModeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinorJson {
    pub n: usize,
    pub length: f64,
    pub rep: Representation,
    pub upper: Vec<ModeRecord>,
    pub lower: Vec<ModeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    pub t: f64,
    pub psi_plus: SpinorJson,
    pub psi_minus: SpinorJson,
    pub phi_plus: FieldJson,
    pub phi_minus: FieldJson,
}

fn modes(field: &ComplexScalarField) -> Vec<ModeRecord> {
    let grid = field.grid();
    field
        .coeffs()
        .iter()
        .enumerate()
        .map(|(m, c)| ModeRecord {
            k: grid.wavenumber(m),
            xi: grid.xi(m),
            re: c.re,
            im: c.im,
        })
        .collect()
}

fn coeffs_from(grid: GridSpec, records: &[ModeRecord]) -> Result<Vec<Complex64>> {
    if records.len() != grid.n() {
        return Err(Error::Length {
            expected: grid.n(),
            got: records.len(),
        });
    }
    let mut out = vec![Complex64::new(0.0, 0.0); grid.n()];
    let mut seen = vec![false; grid.n()];
    for r in records {
        let m = grid
            .index_of(r.k)
            .ok_or_else(|| Error::Format(format!("wavenumber {} outside the grid", r.k)))?;
        if std::mem::replace(&mut seen[m], true) {
            return Err(Error::Format(format!("duplicate wavenumber {}", r.k)));
        }
        out[m] = Complex64::new(r.re, r.im);
    }
    Ok(out)
}

impl FieldJson {
    pub fn from_field(field: &ComplexScalarField) -> Self {
        Self {
            n: field.grid().n(),
            length: field.grid().length(),
            rep: Representation::Spectral,
            modes: modes(field),
        }
    }

    pub fn to_field(&self) -> Result<ComplexScalarField> {
        let grid = GridSpec::new(self.n, self.length)?;
        ComplexScalarField::from_spectral(grid, coeffs_from(grid, &self.modes)?)
    }
}

impl SpinorJson {
    pub fn from_spinor(psi: &SpinorField) -> Self {
        Self {
            n: psi.grid().n(),
            length: psi.grid().length(),
            rep: Representation::Spectral,
            upper: modes(psi.upper()),
            lower: modes(psi.lower()),
        }
    }

    pub fn to_spinor(&self) -> Result<SpinorField> {
        let grid = GridSpec::new(self.n, self.length)?;
        SpinorField::new(
            ComplexScalarField::from_spectral(grid, coeffs_from(grid, &self.upper)?)?,
            ComplexScalarField::from_spectral(grid, coeffs_from(grid, &self.lower)?)?,
        )
    }
}

impl StateJson {
    pub fn from_state(state: &HalfWaveState) -> Self {
        Self {
            t: state.t,
            psi_plus: SpinorJson::from_spinor(&state.psi_plus),
            psi_minus: SpinorJson::from_spinor(&state.psi_minus),
            phi_plus: FieldJson::from_field(&state.phi_plus),
            phi_minus: FieldJson::from_field(&state.phi_minus),
        }
    }

    pub fn to_state(&self) -> Result<HalfWaveState> {
        let state = HalfWaveState {
            t: self.t,
            psi_plus: self.psi_plus.to_spinor()?,
            psi_minus: self.psi_minus.to_spinor()?,
            phi_plus: self.phi_plus.to_field()?,
            phi_minus: self.phi_minus.to_field()?,
        };
        let g = state.psi_plus.grid();
        if [
            state.psi_minus.grid(),
            state.phi_plus.grid(),
            state.phi_minus.grid(),
        ]
        .iter()
        .any(|h| *h != g)
        {
            return Err(Error::GridMismatch);
        }
        Ok(state)
    }
}

/// CSV with header `k,xi,re,im`.
pub fn write_field_csv(mut w: impl Write, field: &ComplexScalarField) -> Result<()> {
    writeln!(w, "k,xi,re,im")?;
    for r in modes(field) {
        writeln!(
            w,
            "{},{},{},{}",
            r.k,
            fmt_f64(r.xi),
            fmt_f64(r.re),
            fmt_f64(r.im)
        )?;
    }
    Ok(())
}

/// CSV with header `component,k,xi,re,im`, upper rows first.
pub fn write_spinor_csv(mut w: impl Write, psi: &SpinorField) -> Result<()> {
    writeln!(w, "component,k,xi,re,im")?;
    for (tag, f) in [("upper", psi.upper()), ("lower", psi.lower())] {
        for r in modes(f) {
            writeln!(
                w,
                "{tag},{},{},{},{}",
                r.k,
                fmt_f64(r.xi),
                fmt_f64(r.re),
                fmt_f64(r.im)
            )?;
        }
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: cannot parse `{s}`")))
}

fn parse_rows(text: &str, header: &str) -> Result<Vec<(Option<String>, ModeRecord)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => return Err(Error::Format(format!("expected header `{header}`"))),
    }
    let tagged = header.starts_with("component");
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let (tag, rest) = if tagged {
            match cols.split_first() {
                Some((t, rest)) => (Some(t.trim().to_string()), rest),
                None => unreachable!(),
            }
        } else {
            (None, &cols[..])
        };
        if rest.len() != 4 {
            return Err(Error::Format(format!("line {}: expected {header}", i + 1)));
        }
        rows.push((
            tag,
            ModeRecord {
                k: parse_num(rest[0], i + 1)?,
                xi: parse_num(rest[1], i + 1)?,
                re: parse_num(rest[2], i + 1)?,
                im: parse_num(rest[3], i + 1)?,
            },
        ));
    }
    Ok(rows)
}

pub fn read_field_csv(mut r: impl Read, grid: GridSpec) -> Result<ComplexScalarField> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let rows: Vec<ModeRecord> = parse_rows(&text, "k,xi,re,im")?
        .into_iter()
        .map(|(_, m)| m)
        .collect();
    ComplexScalarField::from_spectral(grid, coeffs_from(grid, &rows)?)
}

pub fn read_spinor_csv(mut r: impl Read, grid: GridSpec) -> Result<SpinorField> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for (tag, m) in parse_rows(&text, "component,k,xi,re,im")? {
        match tag.as_deref() {
            Some("upper") => upper.push(m),
            Some("lower") => lower.push(m),
            other => return Err(Error::Format(format!("unknown component {other:?}"))),
        }
    }
    SpinorField::new(
        ComplexScalarField::from_spectral(grid, coeffs_from(grid, &upper)?)?,
        ComplexScalarField::from_spectral(grid, coeffs_from(grid, &lower)?)?,
    )
}

/// Binary layout: magic, `u64` N, `f64` L, `u8` representation (0 spectral,
/// 1 physical), `u8` component count, then `N` little-endian `(re, im)`
/// pairs per component. Components must share a grid.
pub fn write_binary(mut w: impl Write, fields: &[&ComplexScalarField]) -> Result<()> {
    let first = fields
        .first()
        .ok_or_else(|| Error::Format("no components to write".into()))?;
    let grid = *first.grid();
    if fields.iter().any(|f| *f.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    let ncomp =
        u8::try_from(fields.len()).map_err(|_| Error::Format("too many components".into()))?;
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(grid.n() as u64).to_le_bytes())?;
    w.write_all(&grid.length().to_le_bytes())?;
    w.write_all(&[0u8, ncomp])?;
    for f in fields {
        for c in f.coeffs() {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary(mut r: impl Read) -> Result<Vec<ComplexScalarField>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Format("bad magic header".into()));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = usize::try_from(u64::from_le_bytes(b8))
        .map_err(|_| Error::Format("grid size overflow".into()))?;
    r.read_exact(&mut b8)?;
    let grid = GridSpec::new(n, f64::from_le_bytes(b8))?;
    let mut tags = [0u8; 2];
    r.read_exact(&mut tags)?;
    let rep = match tags[0] {
        0 => Representation::Spectral,
        1 => Representation::Physical,
        t => return Err(Error::Format(format!("unknown representation tag {t}"))),
    };
    let mut out = Vec::with_capacity(tags[1] as usize);
    for _ in 0..tags[1] {
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            data.push(Complex64::new(re, f64::from_le_bytes(b8)));
        }
        out.push(ComplexScalarField::with_rep(grid, data, rep)?);
    }
    Ok(out)
}
