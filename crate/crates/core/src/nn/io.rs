//! Binary weight and optimizer files.
//!
//! Weights: `OZNN`, version byte, width and height as `u16`, head byte
//! (0 value, 1 outcome), parameter and buffer counts as `u64`, then the
//! parameters and the batch-norm buffers as little-endian `f64`.
//!
//! Parameter order, per conv stage (three trunk stages, then the policy
//! conv): weights `[cout][cin][3][3]`, bias, batch-norm gain, batch-norm
//! shift. Then the policy dense layer (weights `[8][32*h*w]`, bias), the
//! hidden dense layer (`[64][16*h*w]`, bias) and the output layer
//! (`[outputs][64]`, bias). Buffers hold each stage's running mean then
//! running variance.
//!
//! Optimizer: `OZOP`, version byte, learning rate and momentum as `f64`,
//! a `u64` count, then the velocity.

use std::io::{Read, Write};
use std::path::Path;

use super::{HeadKind, Network, NetworkConfig, Sgd};
use crate::error::{Error, Result};
use crate::game::BoardDims;

const WEIGHTS_MAGIC: &[u8; 4] = b"OZNN";
const OPTIM_MAGIC: &[u8; 4] = b"OZOP";
const VERSION: u8 = 1;

struct Cursor<'a> {
    bytes: &'a [u8],
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Format {
                path: self.path.to_owned(),
                reason: "truncated file".into(),
            });
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.saturating_mul(8))?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn write_f64s<W: Write>(out: &mut W, values: &[f64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)
}

fn bad(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_owned(),
        reason: reason.into(),
    }
}

fn save_with(path: &Path, f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    f(&mut out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

impl Network {
    pub fn write_to<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        out.write_all(WEIGHTS_MAGIC)?;
        out.write_all(&[VERSION])?;
        out.write_all(&(self.config.dims.width() as u16).to_le_bytes())?;
        out.write_all(&(self.config.dims.height() as u16).to_le_bytes())?;
        out.write_all(&[match self.config.head {
            HeadKind::Value => 0,
            HeadKind::Outcome => 1,
        }])?;
        out.write_all(&(self.params.len() as u64).to_le_bytes())?;
        out.write_all(&(self.buffers.len() as u64).to_le_bytes())?;
        write_f64s(out, &self.params)?;
        write_f64s(out, &self.buffers)
    }

    pub fn read_from<R: Read>(input: &mut R, path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        let mut c = Cursor { bytes: &bytes, path };
        if c.take(4)? != WEIGHTS_MAGIC {
            return Err(bad(path, "not a weights file"));
        }
        if c.take(1)?[0] != VERSION {
            return Err(bad(path, "unsupported weights version"));
        }
        let width = c.u16()? as usize;
        let height = c.u16()? as usize;
        let dims = BoardDims::new(width, height).map_err(|e| bad(path, e.to_string()))?;
        let head = match c.take(1)?[0] {
            0 => HeadKind::Value,
            1 => HeadKind::Outcome,
            other => return Err(bad(path, format!("unknown head code {other}"))),
        };
        let mut net = Network::new(NetworkConfig { dims, head }, 0);
        let np = c.u64()? as usize;
        let nb = c.u64()? as usize;
        if np != net.params.len() || nb != net.buffers.len() {
            return Err(bad(
                path,
                format!(
                    "expected {} parameters and {} buffers, found {np} and {nb}",
                    net.params.len(),
                    net.buffers.len()
                ),
            ));
        }
        net.params = c.f64s(np)?;
        net.buffers = c.f64s(nb)?;
        if !c.bytes.is_empty() {
            return Err(bad(path, "trailing bytes"));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_with(path, |out| self.write_to(out))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut read_all(path)?.as_slice(), path)
    }
}

impl Sgd {
    pub fn write_to<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        out.write_all(OPTIM_MAGIC)?;
        out.write_all(&[VERSION])?;
        out.write_all(&self.lr.to_le_bytes())?;
        out.write_all(&self.momentum.to_le_bytes())?;
        out.write_all(&(self.velocity().len() as u64).to_le_bytes())?;
        write_f64s(out, self.velocity())
    }

    pub fn read_from<R: Read>(input: &mut R, path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        let mut c = Cursor { bytes: &bytes, path };
        if c.take(4)? != OPTIM_MAGIC {
            return Err(bad(path, "not an optimizer file"));
        }
        if c.take(1)?[0] != VERSION {
            return Err(bad(path, "unsupported optimizer version"));
        }
        let lr = f64::from_le_bytes(c.take(8)?.try_into().unwrap());
        let momentum = f64::from_le_bytes(c.take(8)?.try_into().unwrap());
        let n = c.u64()? as usize;
        let velocity = c.f64s(n)?;
        if !c.bytes.is_empty() {
            return Err(bad(path, "trailing bytes"));
        }
        Ok(Sgd::with_velocity(lr, momentum, velocity))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_with(path, |out| self.write_to(out))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut read_all(path)?.as_slice(), path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::starting_positions;
    use crate::nn::{ResultTarget, TrainingExample, POLICY_OUTPUTS};

    #[test]
    fn round_trip_is_bit_identical() {
        let dims = BoardDims::new(3, 5).unwrap();
        let mut net = Network::new(
            NetworkConfig {
                dims,
                head: HeadKind::Outcome,
            },
            4,
        );
        // Move the running statistics away from their initial values.
        let batch: Vec<TrainingExample> = starting_positions(dims)
            .iter()
            .map(|s| TrainingExample {
                planes: s.encode(),
                policy_target: [1.0 / POLICY_OUTPUTS as f64; POLICY_OUTPUTS],
                result: ResultTarget::Win,
                plies_left: 4,
                value_target: 0.0,
            })
            .collect();
        let mut opt = Sgd::new(0.005, 0.9, net.num_params());
        net.train_step(&batch, &mut opt).unwrap();

        let mut buf = Vec::new();
        net.write_to(&mut buf).unwrap();
        let back = Network::read_from(&mut buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, net);
        for s in starting_positions(dims) {
            let (a, b) = (net.predict(&s), back.predict(&s));
            assert_eq!(format!("{a:?}"), format!("{b:?}"));
        }

        let mut obuf = Vec::new();
        opt.write_to(&mut obuf).unwrap();
        assert_eq!(Sgd::read_from(&mut obuf.as_slice(), Path::new("mem")).unwrap(), opt);

        buf.truncate(buf.len() - 1);
        assert!(Network::read_from(&mut buf.as_slice(), Path::new("mem")).is_err());
    }
}
