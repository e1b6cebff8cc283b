//! Profile serialization: two-column CSV `(r, value)` and a little-endian
//! binary stream.
//!
//! Binary layout: 16-byte header `b"RPF1"`, `n_points: u32`, `r_max: f64`,
//! followed by `n_points + 1` `f64` samples.

use std::io::Write;
use std::path::Path;

use super::{RadialGrid, RadialProfile};
use crate::error::{Error, Result};

pub const PROFILE_MAGIC: [u8; 4] = *b"RPF1";

/// 16-byte header shared by the profile and cone-field formats.
pub(crate) fn encode_header(magic: [u8; 4], count: u32, scale: f64) -> [u8; 16] {
    let mut out = [0u8; 16];
    out[..4].copy_from_slice(&magic);
    out[4..8].copy_from_slice(&count.to_le_bytes());
    out[8..].copy_from_slice(&scale.to_le_bytes());
    out
}

pub(crate) fn decode_header(bytes: &[u8], magic: [u8; 4]) -> Result<(u32, f64)> {
    if bytes.len() < 16 {
        return Err(Error::Format("truncated header".into()));
    }
    if bytes[..4] != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            &bytes[..4],
            std::str::from_utf8(&magic).unwrap_or("?")
        )));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let scale = f64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    Ok((count, scale))
}

pub(crate) fn decode_f64s(bytes: &[u8], count: usize) -> Result<Vec<f64>> {
    if bytes.len() != 8 * count {
        return Err(Error::Format(format!("expected {} payload bytes, got {}", 8 * count, bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub fn encode_binary(profile: &RadialProfile) -> Vec<u8> {
    let g = profile.grid();
    let mut out = Vec::with_capacity(16 + 8 * profile.values().len());
    out.extend_from_slice(&encode_header(PROFILE_MAGIC, g.n_points() as u32, g.r_max()));
    for v in profile.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<RadialProfile> {
    let (n, r_max) = decode_header(bytes, PROFILE_MAGIC)?;
    let grid = RadialGrid::new(r_max, n as usize)?;
    let values = decode_f64s(&bytes[16..], n as usize + 1)?;
    RadialProfile::from_values(grid, values)
}

pub fn write_binary(path: &Path, profile: &RadialProfile) -> Result<()> {
    std::fs::write(path, encode_binary(profile)).map_err(|e| Error::io(path, e))
}

pub fn read_binary(path: &Path) -> Result<RadialProfile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_binary(&bytes)
}

/// CSV with header `r,value`; floats in shortest round-trip form.
pub fn encode_csv(profile: &RadialProfile) -> String {
    let mut out = String::from("r,value\n");
    for (j, v) in profile.values().iter().enumerate() {
        out.push_str(&format!("{:?},{:?}\n", profile.grid().r(j), v));
    }
    out
}

pub fn decode_csv(text: &str) -> Result<RadialProfile> {
    let mut rs = Vec::new();
    let mut vs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with('r')) {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::Format(format!("line {}: expected two columns", i + 1)))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))
        };
        rs.push(parse(a)?);
        vs.push(parse(b)?);
    }
    if rs.len() < 3 || rs[0] != 0.0 {
        return Err(Error::Format("CSV profile must start at r = 0 with at least 3 rows".into()));
    }
    let n = rs.len() - 1;
    let grid = RadialGrid::new(rs[n], n)?;
    for (j, r) in rs.iter().enumerate() {
        if (r - grid.r(j)).abs() > 1e-9 * grid.r_max() {
            return Err(Error::Format(format!("row {j}: r = {r} is off the uniform grid")));
        }
    }
    RadialProfile::from_values(grid, vs)
}

pub fn write_csv(path: &Path, profile: &RadialProfile) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(encode_csv(profile).as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<RadialProfile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RadialProfile {
        let g = RadialGrid::new(3.0, 30).unwrap();
        RadialProfile::from_fn(g, |r| (-r).exp() * (3.0 * r).cos()).unwrap()
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let p = sample();
        let bytes = encode_binary(&p);
        assert_eq!(bytes.len(), 16 + 8 * 31);
        assert_eq!(&bytes[..4], b"RPF1");
        let q = decode_binary(&bytes).unwrap();
        assert_eq!(p.values(), q.values());
        assert_eq!(p.grid(), q.grid());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let p = sample();
        let q = decode_csv(&encode_csv(&p)).unwrap();
        assert_eq!(p.values(), q.values());
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(decode_binary(b"XXXX").is_err());
        let mut bytes = encode_binary(&sample());
        bytes.pop();
        assert!(decode_binary(&bytes).is_err());
        assert!(decode_csv("r,value\n0,1\n0.5,2\n2,3\n").is_err());
    }
}
