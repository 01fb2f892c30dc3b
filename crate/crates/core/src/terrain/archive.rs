//! Binary map archive: an ASCII header line followed by little-endian rasters.

use std::io::{BufRead, BufReader, Read, Write};

use super::{GridMap, Rgb};
use crate::error::{Error, Result};
use crate::grid::Grid;

pub const MAP_MAGIC: &str = "BENCHNAV-MAP v1";

pub fn write_map<W: Write>(map: &GridMap, mut out: W) -> Result<()> {
    writeln!(
        out,
        "{} {} {} {}",
        MAP_MAGIC,
        map.width(),
        map.height(),
        map.resolution()
    )?;
    let mut buf = Vec::with_capacity(map.elevation().len() * 16);
    for raster in [map.elevation(), map.slope(), map.lambda_true()] {
        for v in raster.as_slice() {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    buf.extend_from_slice(map.class_id().as_slice());
    for px in map.colors().as_slice() {
        for c in px {
            buf.push((c * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_map<R: Read>(input: R) -> Result<GridMap> {
    let mut input = BufReader::new(input);
    let mut header = String::new();
    input.read_line(&mut header)?;
    let rest = header
        .trim_end_matches('\n')
        .strip_prefix(MAP_MAGIC)
        .ok_or_else(|| Error::Format("missing map archive header".into()))?;
    let fields: Vec<&str> = rest.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::Format("map header needs width, height, resolution".into()));
    }
    let bad = |_| Error::Format("unparseable map header".into());
    let width: usize = fields[0].parse().map_err(bad)?;
    let height: usize = fields[1].parse().map_err(bad)?;
    let resolution: f64 = fields[2]
        .parse()
        .map_err(|_| Error::Format("unparseable map resolution".into()))?;
    let n = width * height;

    let mut read_f32_raster = || -> Result<Grid<f64>> {
        let mut bytes = vec![0u8; n * 4];
        input.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        Grid::from_vec(width, height, data)
    };
    let elevation = read_f32_raster()?;
    let slope = read_f32_raster()?;
    let lambda = read_f32_raster()?;
    let mut classes = vec![0u8; n];
    input.read_exact(&mut classes)?;
    let mut rgb = vec![0u8; n * 3];
    input.read_exact(&mut rgb)?;
    let colors: Vec<Rgb> = rgb
        .chunks_exact(3)
        .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
        .collect();
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after map rasters".into()));
    }
    GridMap::new(
        resolution,
        Grid::from_vec(width, height, colors)?,
        elevation,
        slope,
        Grid::from_vec(width, height, classes)?,
        lambda,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::{generate_map, ScenarioSpec};

    #[test]
    fn header_and_size_follow_the_layout() {
        let map = generate_map(&ScenarioSpec::standard(1)).unwrap();
        let mut bytes = Vec::new();
        write_map(&map, &mut bytes).unwrap();
        let header = b"BENCHNAV-MAP v1 64 64 0.5\n";
        assert!(bytes.starts_with(header));
        assert_eq!(bytes.len(), header.len() + 4096 * (12 + 1 + 3));
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let map = generate_map(&ScenarioSpec::standard(2)).unwrap();
        let mut first = Vec::new();
        write_map(&map, &mut first).unwrap();
        let loaded = read_map(first.as_slice()).unwrap();
        assert_eq!(loaded.class_id(), map.class_id());
        let mut second = Vec::new();
        write_map(&loaded, &mut second).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn truncated_or_foreign_files_are_rejected() {
        let map = generate_map(&ScenarioSpec::standard(3)).unwrap();
        let mut bytes = Vec::new();
        write_map(&map, &mut bytes).unwrap();
        assert!(read_map(&bytes[..bytes.len() - 1]).is_err());
        assert!(read_map(&b"P6\n1 1\n255\n\0\0\0"[..]).is_err());
    }
}
