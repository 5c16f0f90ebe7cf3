//! Binary and CSV dumps of observation records.
//!
//! Binary layout: the 8 magic bytes `SPDEOBS1`, a little-endian `u64` header
//! length, a UTF-8 TOML header, then the increments mode-major as
//! little-endian `(re, im)` f64 pairs, then the states in the same layout
//! when `has_states = true`.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ObservationRecord, TimeGrid};
use crate::error::{Error, Result};
use crate::spectral::SpectralModel;

const MAGIC: &[u8; 8] = b"SPDEOBS1";

#[derive(Serialize, Deserialize)]
struct Header {
    theta_true: f64,
    horizon: f64,
    n_steps: usize,
    n_modes: usize,
    /// Hex, since TOML integers are signed 64-bit.
    seed: String,
    rng_algo: String,
    has_states: bool,
    model: SpectralModel,
}

pub fn write_binary<W: Write>(record: &ObservationRecord, mut out: W) -> Result<()> {
    record.validate_shape()?;
    let header = Header {
        theta_true: record.theta_true,
        horizon: record.grid.horizon,
        n_steps: record.grid.n_steps,
        n_modes: record.dy.len(),
        seed: format!("{:016x}", record.seed),
        rng_algo: record.rng_algo.clone(),
        has_states: record.states.is_some(),
        model: (*record.model).clone(),
    };
    let text = toml::to_string(&header).map_err(|e| Error::Parse(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&(text.len() as u64).to_le_bytes())?;
    out.write_all(text.as_bytes())?;
    write_rows(&mut out, &record.dy)?;
    if let Some(states) = &record.states {
        write_rows(&mut out, states)?;
    }
    out.flush()?;
    Ok(())
}

fn write_rows<W: Write>(out: &mut W, rows: &[Vec<Complex64>]) -> Result<()> {
    let mut buf = Vec::with_capacity(rows.first().map_or(0, |r| r.len() * 16));
    for row in rows {
        buf.clear();
        for z in row {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<ObservationRecord> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse("not an observation dump".into()));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut text = vec![0u8; len];
    input.read_exact(&mut text)?;
    let text = String::from_utf8(text).map_err(|e| Error::Parse(e.to_string()))?;
    let header: Header = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    let seed = u64::from_str_radix(&header.seed, 16).map_err(|e| Error::Parse(e.to_string()))?;
    header.model.validate()?;
    if header.model.n_modes() != header.n_modes {
        return Err(Error::ShapeMismatch("header mode count disagrees with model".into()));
    }
    let dy = read_rows(&mut input, header.n_modes, header.n_steps)?;
    let states = if header.has_states {
        Some(read_rows(&mut input, header.n_modes, header.n_steps)?)
    } else {
        None
    };
    Ok(ObservationRecord {
        model: Arc::new(header.model),
        theta_true: header.theta_true,
        grid: TimeGrid::new(header.horizon, header.n_steps)?,
        dy,
        seed,
        rng_algo: header.rng_algo,
        states,
    })
}

fn read_rows<R: Read>(input: &mut R, n_modes: usize, n_steps: usize) -> Result<Vec<Vec<Complex64>>> {
    let mut buf = vec![0u8; n_steps * 16];
    (0..n_modes)
        .map(|_| {
            input.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(16)
                .map(|c| {
                    let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                    let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                    Complex64::new(re, im)
                })
                .collect())
        })
        .collect()
}

/// Long-format CSV with columns `mode,step,t,re,im`.
pub fn write_csv<W: Write>(record: &ObservationRecord, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["mode", "step", "t", "re", "im"]).map_err(to_err)?;
    for (k, row) in record.dy.iter().enumerate() {
        for (i, z) in row.iter().enumerate() {
            let step = i + 1;
            w.write_record(&[
                k.to_string(),
                step.to_string(),
                record.grid.time(step).to_string(),
                z.re.to_string(),
                z.im.to_string(),
            ])
            .map_err(to_err)?;
        }
    }
    w.flush()?;
    Ok(())
}
