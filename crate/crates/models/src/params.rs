//! Named trainable parameters with seeded initialisation and safetensors
//! persistence.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use candle_core::{DType, Device, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Parameters in creation order. Order matters: the optimizer walks them in
/// this order, which keeps training bit-reproducible.
pub struct ParamStore {
    dtype: DType,
    device: Device,
    rng: ChaCha8Rng,
    names: Vec<String>,
    vars: Vec<Var>,
}

impl ParamStore {
    pub fn new(seed: u64, dtype: DType) -> Self {
        Self {
            dtype,
            device: Device::Cpu,
            rng: ChaCha8Rng::seed_from_u64(seed),
            names: Vec::new(),
            vars: Vec::new(),
        }
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    fn push(&mut self, name: &str, shape: &[usize], values: Vec<f64>) -> Result<Tensor> {
        if self.names.iter().any(|n| n == name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter {name}")));
        }
        let t = Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?;
        let var = Var::from_tensor(&t)?;
        let out = var.as_tensor().clone();
        self.names.push(name.to_string());
        self.vars.push(var);
        Ok(out)
    }

    /// U(-bound, bound) entries.
    pub fn uniform(&mut self, name: &str, shape: &[usize], bound: f64) -> Result<Tensor> {
        let n = shape.iter().product();
        let values = (0..n).map(|_| self.rng.random_range(-bound..=bound)).collect();
        self.push(name, shape, values)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> Result<Tensor> {
        let n = shape.iter().product();
        self.push(name, shape, vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn var(&self, name: &str) -> Option<&Var> {
        self.names.iter().position(|n| n == name).map(|i| &self.vars[i])
    }

    pub fn num_params(&self) -> usize {
        self.vars.iter().map(|v| v.elem_count()).sum()
    }

    /// Overwrite a parameter in place; every model holding the tensor sees it.
    pub fn assign(&self, name: &str, values: &Tensor) -> Result<()> {
        let var = self
            .var(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter {name}")))?;
        if values.dims() != var.dims() {
            return Err(Error::InvalidArgument(format!(
                "parameter {name}: shape {:?} does not match {:?}",
                values.dims(),
                var.dims()
            )));
        }
        var.set(&values.to_dtype(self.dtype)?)?;
        Ok(())
    }

    /// All parameter values flattened to f64, in creation order.
    pub fn snapshot(&self) -> Result<Vec<Vec<f64>>> {
        self.vars
            .iter()
            .map(|v| Ok(v.as_tensor().flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?))
            .collect()
    }

    pub fn tensors(&self) -> HashMap<String, Tensor> {
        self.names
            .iter()
            .zip(&self.vars)
            .map(|(n, v)| (n.clone(), v.as_tensor().clone()))
            .collect()
    }

    /// Copy values for every parameter from `tensors`; all names must be present.
    pub fn load(&self, tensors: &HashMap<String, Tensor>) -> Result<()> {
        for name in &self.names {
            let t = tensors
                .get(name)
                .ok_or_else(|| Error::InvalidArgument(format!("missing parameter {name}")))?;
            self.assign(name, t)?;
        }
        Ok(())
    }
}

/// Parameters plus auxiliary tensors and a JSON config, stored as one
/// safetensors file. The config hash is recorded alongside the config.
pub struct Checkpoint {
    pub kind: String,
    pub config: serde_json::Value,
    pub tensors: HashMap<String, Tensor>,
}

pub const META_KIND: &str = "kind";
pub const META_CONFIG: &str = "config";
pub const META_CONFIG_HASH: &str = "config_hash";

pub fn config_hash(config: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(config.to_string().as_bytes()))
}

pub fn file_hash(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut meta = HashMap::new();
        meta.insert(META_KIND.to_string(), self.kind.clone());
        meta.insert(META_CONFIG.to_string(), self.config.to_string());
        meta.insert(META_CONFIG_HASH.to_string(), config_hash(&self.config));
        // Sorted so that identical checkpoints serialise to identical bytes.
        let sorted: BTreeMap<_, _> = self.tensors.iter().collect();
        let views: Vec<(String, Tensor)> = sorted
            .into_iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let data = safetensors::serialize(
            views.iter().map(|(k, v)| (k.as_str(), v)),
            Some(meta),
        )
        .map_err(|e| Error::checkpoint(path, e.to_string()))?;
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|source| Error::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        std::fs::write(path, data).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>, expected_kind: &str) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let (_, header) = safetensors::SafeTensors::read_metadata(&bytes)
            .map_err(|e| Error::checkpoint(path, e.to_string()))?;
        let meta = header
            .metadata()
            .clone()
            .ok_or_else(|| Error::checkpoint(path, "no metadata"))?;
        let get = |k: &str| {
            meta.get(k)
                .cloned()
                .ok_or_else(|| Error::checkpoint(path, format!("metadata key {k} missing")))
        };
        let kind = get(META_KIND)?;
        if kind != expected_kind {
            return Err(Error::checkpoint(
                path,
                format!("expected a {expected_kind} checkpoint, found {kind}"),
            ));
        }
        let config: serde_json::Value =
            serde_json::from_str(&get(META_CONFIG)?).map_err(|e| Error::checkpoint(path, e.to_string()))?;
        if config_hash(&config) != get(META_CONFIG_HASH)? {
            return Err(Error::checkpoint(path, "config hash mismatch"));
        }
        let tensors = candle_core::safetensors::load_buffer(&bytes, &Device::Cpu)?;
        Ok(Self { kind, config, tensors })
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("checkpoint has no tensor {name}")))
    }
}
