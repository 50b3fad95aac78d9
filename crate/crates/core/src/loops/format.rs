//! Binary loop-configuration record.
//!
//! Layout (little endian): magic `ANHLOOP1`; `beta: f64`; `slices: u64`;
//! `ndim: u64`; `ndim` extents as `u64`; boundary kind `u8` (0 free, 1 plus,
//! 2 minus); clamp level `f64` (0 for free); then `sites * slices` values
//! as `f64`, site-major and slice-major within a site. Floats are stored by
//! bit pattern, so a round trip is exact.

use std::io::{Read, Write};

use super::{BoundaryCondition, LatticeBox, LoopConfiguration, TemperatureLoop};
use crate::error::{Error, Result};

pub const LOOP_MAGIC: &[u8; 8] = b"ANHLOOP1";

pub fn write_configuration<W: Write>(config: &LoopConfiguration, out: &mut W) -> Result<()> {
    out.write_all(LOOP_MAGIC)?;
    out.write_all(&config.beta().to_le_bytes())?;
    out.write_all(&(config.slices() as u64).to_le_bytes())?;
    let extents = config.volume().extents();
    out.write_all(&(extents.len() as u64).to_le_bytes())?;
    for e in extents {
        out.write_all(&(*e as u64).to_le_bytes())?;
    }
    let (kind, clamp) = match config.boundary() {
        BoundaryCondition::Free => (0u8, 0.0),
        BoundaryCondition::PlusClamped(c) => (1, c),
        BoundaryCondition::MinusClamped(c) => (2, c),
    };
    out.write_all(&[kind])?;
    out.write_all(&clamp.to_le_bytes())?;
    for l in config.loops() {
        for v in l.values() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(input)?))
}

pub fn read_configuration<R: Read>(input: &mut R) -> Result<LoopConfiguration> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != LOOP_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let beta = read_f64(input)?;
    let slices = read_u64(input)? as usize;
    let ndim = read_u64(input)? as usize;
    if ndim == 0 || ndim > 16 {
        return Err(Error::Format(format!("implausible dimension {ndim}")));
    }
    let extents = (0..ndim)
        .map(|_| read_u64(input).map(|e| e as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut kind = [0u8; 1];
    input.read_exact(&mut kind)?;
    let clamp = read_f64(input)?;
    let boundary = match kind[0] {
        0 => BoundaryCondition::Free,
        1 => BoundaryCondition::PlusClamped(clamp),
        2 => BoundaryCondition::MinusClamped(clamp),
        k => return Err(Error::Format(format!("unknown boundary kind {k}"))),
    };
    let volume = LatticeBox::new(extents).map_err(|e| Error::Format(e.to_string()))?;
    let loops = (0..volume.sites())
        .map(|_| {
            let values = (0..slices).map(|_| read_f64(input)).collect::<Result<Vec<_>>>()?;
            TemperatureLoop::new(values, beta).map_err(|e| Error::Format(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    LoopConfiguration::new(volume, loops, boundary).map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            extents in prop::collection::vec(1usize..4, 1..4),
            slices in 2usize..6,
            beta in 0.01f64..50.0,
            kind in 0u8..3,
            clamp in 0.01f64..5.0,
            seed in any::<u64>(),
        ) {
            let volume = LatticeBox::new(extents).unwrap();
            let boundary = match kind {
                0 => BoundaryCondition::Free,
                1 => BoundaryCondition::PlusClamped(clamp),
                _ => BoundaryCondition::MinusClamped(clamp),
            };
            let mut state = seed;
            let loops = (0..volume.sites()).map(|_| {
                let values = (0..slices).map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (state >> 11) as f64 / (1u64 << 53) as f64 * 20.0 - 10.0
                }).collect();
                TemperatureLoop::new(values, beta).unwrap()
            }).collect();
            let config = LoopConfiguration::new(volume, loops, boundary).unwrap();
            let mut bytes = Vec::new();
            write_configuration(&config, &mut bytes).unwrap();
            let back = read_configuration(&mut bytes.as_slice()).unwrap();
            prop_assert_eq!(back, config);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_configuration(&mut &b"NOTALOOP"[..]).is_err());
        assert!(read_configuration(&mut &b"ANHLOOP1\x00"[..]).is_err());
    }
}
