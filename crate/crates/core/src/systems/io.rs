//! System files: a JSON manifest with the three matrices inline as decimal
//! strings, or referenced as Matrix Market sidecar files for large sizes.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces every entry bit for bit.

use super::LdqoSystem;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Matrices with more entries than this are written as Matrix Market
/// sidecars instead of inline arrays.
pub const SIDECAR_THRESHOLD: usize = 200 * 200;

#[derive(Serialize, Deserialize)]
struct Manifest {
    name: String,
    n: usize,
    m: usize,
    matrices: ManifestMatrices,
}

#[derive(Serialize, Deserialize)]
struct ManifestMatrices {
    a: MatrixSource,
    b: MatrixSource,
    m: MatrixSource,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixSource {
    Inline(Vec<Vec<String>>),
    Sidecar { matrix_market: String },
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Read an LD_QO system from a JSON manifest, resolving Matrix Market
/// sidecars relative to the manifest location.
pub fn read_system(path: impl AsRef<Path>) -> Result<LdqoSystem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| malformed(path, e.to_string()))?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));

    let a = load_matrix(&manifest.matrices.a, dir, path, "a")?;
    let b = load_matrix(&manifest.matrices.b, dir, path, "b")?;
    let m = load_matrix(&manifest.matrices.m, dir, path, "m")?;

    check_shape(path, "a", &a, manifest.n, manifest.n)?;
    check_shape(path, "b", &b, manifest.n, manifest.m)?;
    check_shape(path, "m", &m, manifest.n, manifest.n)?;

    LdqoSystem::new(a, b, m)
}

fn check_shape(
    path: &Path,
    field: &str,
    mat: &DenseMatrix,
    rows: usize,
    cols: usize,
) -> Result<()> {
    if mat.rows() != rows || mat.cols() != cols {
        return Err(malformed(
            path,
            format!(
                "field '{field}': expected {rows}x{cols} from the manifest header, found {}x{}",
                mat.rows(),
                mat.cols()
            ),
        ));
    }
    Ok(())
}

fn load_matrix(
    source: &MatrixSource,
    dir: &Path,
    manifest_path: &Path,
    field: &str,
) -> Result<DenseMatrix> {
    match source {
        MatrixSource::Inline(rows) => {
            let r = rows.len();
            let c = rows.first().map_or(0, |row| row.len());
            let mut data = Vec::with_capacity(r * c);
            for (i, row) in rows.iter().enumerate() {
                if row.len() != c {
                    return Err(malformed(
                        manifest_path,
                        format!("field '{field}': ragged row {i}"),
                    ));
                }
                for (j, s) in row.iter().enumerate() {
                    let v: f64 = s.parse().map_err(|_| {
                        malformed(
                            manifest_path,
                            format!("field '{field}': entry ({i}, {j}) is not a number: {s:?}"),
                        )
                    })?;
                    data.push(v);
                }
            }
            DenseMatrix::new(r, c, data).map_err(|e| {
                malformed(manifest_path, format!("field '{field}': {e}"))
            })
        }
        MatrixSource::Sidecar { matrix_market } => {
            let p = dir.join(matrix_market);
            read_matrix_market(&p)
        }
    }
}

/// Write a system manifest (and sidecars for large matrices) to `path`,
/// deriving the stored name from the file stem.
pub fn write_system(sys: &LdqoSystem, path: impl AsRef<Path>) -> Result<()> {
    let name = path
        .as_ref()
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "system".to_string());
    write_system_named(sys, path, &name)
}

/// Write a system manifest with an explicit model name.
pub fn write_system_named(sys: &LdqoSystem, path: impl AsRef<Path>, name: &str) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "system".to_string());

    let store = |mat: &DenseMatrix, field: &str| -> Result<MatrixSource> {
        if mat.rows() * mat.cols() > SIDECAR_THRESHOLD {
            let file = format!("{stem}_{field}.mtx");
            write_matrix_market(mat, &dir.join(&file))?;
            Ok(MatrixSource::Sidecar {
                matrix_market: file,
            })
        } else {
            let rows = (0..mat.rows())
                .map(|i| (0..mat.cols()).map(|j| format!("{}", mat[(i, j)])).collect())
                .collect();
            Ok(MatrixSource::Inline(rows))
        }
    };

    let manifest = Manifest {
        name: name.to_string(),
        n: sys.order(),
        m: sys.inputs(),
        matrices: ManifestMatrices {
            a: store(sys.a(), "a")?,
            b: store(sys.b(), "b")?,
            m: store(sys.m(), "m")?,
        },
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| malformed(path, e.to_string()))?;
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Read a Matrix Market file (coordinate or array, real, general or
/// symmetric).
pub fn read_matrix_market(path: &Path) -> Result<DenseMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| malformed(path, "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(malformed(path, "missing %%MatrixMarket matrix header"));
    }
    let format = tokens[2].as_str();
    let field = tokens[3].as_str();
    let symmetry = tokens[4].as_str();
    if field != "real" && field != "integer" {
        return Err(malformed(path, format!("unsupported field '{field}'")));
    }
    if symmetry != "general" && symmetry != "symmetric" {
        return Err(malformed(path, format!("unsupported symmetry '{symmetry}'")));
    }

    let mut body = lines.filter(|l| !l.trim_start().starts_with('%') && !l.trim().is_empty());
    let size_line = body
        .next()
        .ok_or_else(|| malformed(path, "missing size line"))?;
    let sizes: Vec<&str> = size_line.split_whitespace().collect();

    match format {
        "coordinate" => {
            if sizes.len() != 3 {
                return Err(malformed(path, "coordinate size line needs rows cols nnz"));
            }
            let rows: usize = sizes[0].parse().map_err(|_| malformed(path, "bad row count"))?;
            let cols: usize = sizes[1].parse().map_err(|_| malformed(path, "bad col count"))?;
            let nnz: usize = sizes[2].parse().map_err(|_| malformed(path, "bad nnz"))?;
            let mut mat = DenseMatrix::zeros(rows, cols);
            let mut seen = 0;
            for line in body {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(malformed(path, format!("bad coordinate entry: {line:?}")));
                }
                let i: usize = parts[0].parse().map_err(|_| malformed(path, "bad row index"))?;
                let j: usize = parts[1].parse().map_err(|_| malformed(path, "bad col index"))?;
                let v: f64 = parts[2].parse().map_err(|_| malformed(path, "bad value"))?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(malformed(path, format!("index ({i}, {j}) out of range")));
                }
                mat[(i - 1, j - 1)] = v;
                if symmetry == "symmetric" && i != j {
                    mat[(j - 1, i - 1)] = v;
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(malformed(
                    path,
                    format!("expected {nnz} entries, found {seen}"),
                ));
            }
            validate_finite(path, &mat)?;
            Ok(mat)
        }
        "array" => {
            if sizes.len() != 2 {
                return Err(malformed(path, "array size line needs rows cols"));
            }
            let rows: usize = sizes[0].parse().map_err(|_| malformed(path, "bad row count"))?;
            let cols: usize = sizes[1].parse().map_err(|_| malformed(path, "bad col count"))?;
            let values: Vec<f64> = body
                .flat_map(|l| l.split_whitespace())
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| malformed(path, format!("bad value {t:?}")))
                })
                .collect::<Result<_>>()?;
            let mut mat = DenseMatrix::zeros(rows, cols);
            if symmetry == "symmetric" {
                // lower triangle, column major
                let expected = cols * (cols + 1) / 2;
                if rows != cols || values.len() != expected {
                    return Err(malformed(
                        path,
                        format!("symmetric array expects {expected} values, found {}", values.len()),
                    ));
                }
                let mut it = values.into_iter();
                for j in 0..cols {
                    for i in j..rows {
                        let v = it.next().unwrap();
                        mat[(i, j)] = v;
                        mat[(j, i)] = v;
                    }
                }
            } else {
                if values.len() != rows * cols {
                    return Err(malformed(
                        path,
                        format!(
                            "array expects {} values, found {}",
                            rows * cols,
                            values.len()
                        ),
                    ));
                }
                let mut it = values.into_iter();
                for j in 0..cols {
                    for i in 0..rows {
                        mat[(i, j)] = it.next().unwrap();
                    }
                }
            }
            validate_finite(path, &mat)?;
            Ok(mat)
        }
        other => Err(malformed(path, format!("unsupported format '{other}'"))),
    }
}

fn validate_finite(path: &Path, mat: &DenseMatrix) -> Result<()> {
    if mat.data().iter().any(|v| !v.is_finite()) {
        return Err(malformed(path, "non-finite entry"));
    }
    Ok(())
}

/// Write a dense matrix as `array real general`, 17 significant digits.
pub fn write_matrix_market(mat: &DenseMatrix, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(mat.rows() * mat.cols() * 24 + 64);
    out.push_str("%%MatrixMarket matrix array real general\n");
    out.push_str(&format!("{} {}\n", mat.rows(), mat.cols()));
    for j in 0..mat.cols() {
        for i in 0..mat.rows() {
            out.push_str(&format!("{:.16e}\n", mat[(i, j)]));
        }
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}
