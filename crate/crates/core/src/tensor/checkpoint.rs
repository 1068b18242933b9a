//! Checkpoint container.
//!
//! ```text
//! fcrg-checkpoint 1
//! dtype f32
//! seed 7
//! epoch 12
//! config hidden_size 64
//! ...
//! param embedding shared 32x50
//! ...
//! payload
//! <raw little-endian values of every param, in header order>
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{ParamStore, Partition, Real, Result, Tensor, TensorError};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "fcrg-checkpoint";

#[derive(Clone, Debug)]
pub struct Checkpoint<T: Real> {
    pub seed: u64,
    pub epoch: usize,
    /// Model configuration as ordered key/value pairs.
    pub config: Vec<(String, String)>,
    pub params: ParamStore<T>,
}

fn bad(msg: impl Into<String>) -> TensorError {
    TensorError::Invalid(format!("checkpoint: {}", msg.into()))
}

impl<T: Real> Checkpoint<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = format!(
            "{MAGIC} {FORMAT_VERSION}\ndtype {}\nseed {}\nepoch {}\n",
            T::DTYPE,
            self.seed,
            self.epoch
        );
        for (k, v) in &self.config {
            header.push_str(&format!("config {k} {v}\n"));
        }
        for p in self.params.iter() {
            let shape: Vec<String> = p.value.shape().iter().map(|d| d.to_string()).collect();
            header.push_str(&format!(
                "param {} {} {}\n",
                p.name,
                p.partition,
                shape.join("x")
            ));
        }
        header.push_str("payload\n");
        let mut out = header.into_bytes();
        for p in self.params.iter() {
            for &v in p.value.data() {
                v.write_le(&mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let next_line = |pos: &mut usize| -> Result<String> {
            let rest = &bytes[*pos..];
            let end = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| bad("truncated header"))?;
            let line = std::str::from_utf8(&rest[..end]).map_err(|_| bad("header is not UTF-8"))?;
            *pos += end + 1;
            Ok(line.to_string())
        };

        let magic = next_line(&mut pos)?;
        let version = magic
            .strip_prefix(MAGIC)
            .map(str::trim)
            .ok_or_else(|| bad("missing magic line"))?;
        if version != FORMAT_VERSION.to_string() {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let mut seed = 0;
        let mut epoch = 0;
        let mut config = Vec::new();
        let mut specs: Vec<(String, Partition, Vec<usize>)> = Vec::new();
        loop {
            let line = next_line(&mut pos)?;
            if line == "payload" {
                break;
            }
            let mut parts = line.splitn(2, ' ');
            let key = parts.next().unwrap_or_default();
            let rest = parts.next().unwrap_or_default();
            match key {
                "dtype" if rest != T::DTYPE => {
                    return Err(bad(format!("stored dtype {rest}, requested {}", T::DTYPE)))
                }
                "dtype" => {}
                "seed" => seed = rest.parse().map_err(|_| bad("bad seed"))?,
                "epoch" => epoch = rest.parse().map_err(|_| bad("bad epoch"))?,
                "config" => {
                    let (k, v) = rest.split_once(' ').ok_or_else(|| bad("bad config line"))?;
                    config.push((k.to_string(), v.to_string()));
                }
                "param" => {
                    let f: Vec<&str> = rest.split(' ').collect();
                    if f.len() != 3 {
                        return Err(bad(format!("bad param line `{line}`")));
                    }
                    let shape = f[2]
                        .split('x')
                        .map(|d| d.parse::<usize>().map_err(|_| bad("bad shape")))
                        .collect::<Result<Vec<_>>>()?;
                    specs.push((f[0].to_string(), f[1].parse()?, shape));
                }
                other => return Err(bad(format!("unknown header key `{other}`"))),
            }
        }
        let mut params = ParamStore::new();
        for (name, partition, shape) in specs {
            let n: usize = shape.iter().product();
            let end = pos + n * T::BYTES;
            if end > bytes.len() {
                return Err(bad(format!("payload truncated in `{name}`")));
            }
            let data = bytes[pos..end]
                .chunks_exact(T::BYTES)
                .map(T::read_le)
                .collect();
            pos = end;
            params.insert(&name, partition, Tensor::new(shape, data)?)?;
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes after payload"));
        }
        Ok(Self {
            seed,
            epoch,
            config,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())
    }

    pub fn load(
        path: &Path,
    ) -> std::result::Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let bytes = fs::read(path)?;
        Ok(Self::from_bytes(&bytes)?)
    }
}
