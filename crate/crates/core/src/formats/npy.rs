use std::io::{BufReader, BufWriter};
use std::path::Path;

use npyz::WriterBuilder;

use crate::error::{Error, Result};
use crate::nn::Tensor;

fn ingest(path: &Path, message: impl Into<String>) -> Error {
    Error::Ingest { path: path.to_path_buf(), message: message.into() }
}

/// Reads a 2-D little-endian `f4` or `f8` array in C order.
pub fn read_npy_matrix(path: &Path) -> Result<Tensor> {
    let file = BufReader::new(std::fs::File::open(path)?);
    let npy = npyz::NpyFile::new(file).map_err(|e| ingest(path, e.to_string()))?;
    let shape = npy.shape().to_vec();
    if shape.len() != 2 {
        return Err(ingest(path, format!("expected a 2-D array, found shape {shape:?}")));
    }
    if npy.order() != npyz::Order::C {
        return Err(ingest(path, "Fortran-ordered arrays are not supported"));
    }
    let descr = npy.dtype().descr();
    let data: Vec<f64> = match descr.as_str() {
        "'<f4'" => npy.into_vec::<f32>().map_err(|e| ingest(path, e.to_string()))?.into_iter().map(f64::from).collect(),
        "'<f8'" => npy.into_vec::<f64>().map_err(|e| ingest(path, e.to_string()))?,
        other => return Err(ingest(path, format!("unsupported dtype {other}"))),
    };
    Ok(Tensor::from_vec(shape[0] as usize, shape[1] as usize, data))
}

/// Writes `t` as a 2-D `<f4` array.
pub fn write_npy_matrix(path: &Path, t: &Tensor) -> Result<()> {
    let file = BufWriter::new(std::fs::File::create(path)?);
    let mut writer = npyz::WriteOptions::new()
        .default_dtype()
        .shape(&[t.rows() as u64, t.cols() as u64])
        .writer(file)
        .begin_nd()?;
    writer.extend(t.data().iter().map(|&x| x as f32))?;
    writer.finish()?;
    Ok(())
}
