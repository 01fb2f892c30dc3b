//! Model archive: a header line, then length-prefixed little-endian f64 arrays.
//!
//! Layout after the header: `n_classes`, `n_features` (u64), the classifier's
//! feature means, feature scales and weights, `n_gps` (u64), then per GP its
//! inputs, targets and `[signal_variance, lengthscale, noise_variance]`.
//! Every array is a u64 length followed by that many f64 values.

use std::io::{BufRead, BufReader, Read, Write};

use super::classifier::Classifier;
use super::gp::{GpHyper, GpModel};
use super::TravModels;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &str = "BENCHNAV-TRAV v1";

fn put_u64<W: Write>(out: &mut W, v: u64) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_array<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    put_u64(out, values.len() as u64)?;
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_array<R: Read>(input: &mut R) -> Result<Vec<f64>> {
    let n = get_u64(input)? as usize;
    if n > 1 << 28 {
        return Err(Error::Format(format!("implausible array length {n}")));
    }
    let mut bytes = vec![0u8; n * 8];
    input.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn write_models<W: Write>(models: &TravModels, mut out: W) -> Result<()> {
    writeln!(out, "{MODEL_MAGIC}")?;
    let c = &models.classifier;
    put_u64(&mut out, c.n_classes() as u64)?;
    put_u64(&mut out, c.n_features() as u64)?;
    put_array(&mut out, c.feature_mean())?;
    put_array(&mut out, c.feature_scale())?;
    put_array(&mut out, c.weights())?;
    put_u64(&mut out, models.gps.len() as u64)?;
    for gp in &models.gps {
        put_array(&mut out, gp.inputs())?;
        put_array(&mut out, gp.targets())?;
        let h = gp.hyper();
        put_array(&mut out, &[h.signal_variance, h.lengthscale, h.noise_variance])?;
    }
    Ok(())
}

pub fn read_models<R: Read>(input: R) -> Result<TravModels> {
    let mut input = BufReader::new(input);
    let mut header = String::new();
    input.read_line(&mut header)?;
    if header.trim_end_matches('\n') != MODEL_MAGIC {
        return Err(Error::Format("missing model archive header".into()));
    }
    let n_classes = get_u64(&mut input)? as usize;
    let n_features = get_u64(&mut input)? as usize;
    let mean = get_array(&mut input)?;
    let scale = get_array(&mut input)?;
    let weights = get_array(&mut input)?;
    if mean.len() != n_features {
        return Err(Error::Format("feature count disagrees with header".into()));
    }
    let classifier = Classifier::from_parts(n_classes, mean, scale, weights)?;
    let n_gps = get_u64(&mut input)? as usize;
    let mut gps = Vec::with_capacity(n_gps.min(256));
    for _ in 0..n_gps {
        let inputs = get_array(&mut input)?;
        let targets = get_array(&mut input)?;
        let h = get_array(&mut input)?;
        if h.len() != 3 {
            return Err(Error::Format("GP hyperparameter block must hold 3 values".into()));
        }
        let hyper = GpHyper {
            signal_variance: h[0],
            lengthscale: h[1],
            noise_variance: h[2],
        };
        gps.push(GpModel::from_parts(inputs, targets, hyper)?);
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after model archive".into()));
    }
    Ok(TravModels { classifier, gps })
}
