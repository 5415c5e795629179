//! Matrix Market I/O for the formats the solver exchanges: symmetric
//! coordinate matrices (real or complex) and dense `array` panels for
//! right-hand sides.
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! write→read cycle reproduces every entry bit for bit. Symmetric files only
//! store the lower triangle; duplicate entries are summed on read and a
//! missing diagonal entry simply stays structurally absent.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::dense::DenseMatrix;
use crate::scalar::{Scalar, ScalarField};
use crate::sparse::SymSparseMatrix;

#[derive(Debug, Error)]
pub enum MmError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported matrix kind: {0}")]
    Unsupported(String),
    #[error("file holds a {found:?} matrix but a {expected:?} one was requested")]
    FieldMismatch { expected: ScalarField, found: ScalarField },
    #[error("invalid matrix: {0}")]
    Invalid(String),
}

fn parse_err(line: usize, msg: impl Into<String>) -> MmError {
    MmError::Parse { line: line + 1, msg: msg.into() }
}

struct Header {
    format: String,
    field: ScalarField,
    symmetry: String,
}

fn parse_header(first: &str) -> Result<Header, MmError> {
    let toks: Vec<String> = first.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if toks.len() != 5 || toks[0] != "%%matrixmarket" {
        return Err(parse_err(0, "expected a MatrixMarket header line"));
    }
    if toks[1] != "matrix" {
        return Err(MmError::Unsupported(format!("object '{}'", toks[1])));
    }
    let field = match toks[3].as_str() {
        "real" => ScalarField::Real,
        "complex" => ScalarField::Complex,
        other => return Err(MmError::Unsupported(format!("field '{other}'"))),
    };
    Ok(Header { format: toks[2].clone(), field, symmetry: toks[4].clone() })
}

/// Peek at a file's header to learn whether it stores real or complex data.
pub fn sniff_field(path: impl AsRef<Path>) -> Result<ScalarField, MmError> {
    let text = fs::read_to_string(path)?;
    let first = text.lines().next().unwrap_or("");
    Ok(parse_header(first)?.field)
}

fn parse_value<T: Scalar>(toks: &[&str], lno: usize) -> Result<T, MmError> {
    let need = match T::FIELD {
        ScalarField::Real => 1,
        ScalarField::Complex => 2,
    };
    if toks.len() != need {
        return Err(parse_err(lno, format!("expected {need} value column(s), got {}", toks.len())));
    }
    let re: f64 = toks[0]
        .parse()
        .map_err(|_| parse_err(lno, format!("bad number '{}'", toks[0])))?;
    let im: f64 = if need == 2 {
        toks[1]
            .parse()
            .map_err(|_| parse_err(lno, format!("bad number '{}'", toks[1])))?
    } else {
        0.0
    };
    let re = <T::Real as num_traits::FromPrimitive>::from_f64(re).unwrap();
    let im = <T::Real as num_traits::FromPrimitive>::from_f64(im).unwrap();
    Ok(T::from_parts(re, im))
}

fn write_value<T: Scalar>(out: &mut String, v: T) {
    match T::FIELD {
        ScalarField::Real => {
            let _ = write!(out, "{}", v.re());
        }
        ScalarField::Complex => {
            let _ = write!(out, "{} {}", v.re(), v.im());
        }
    }
}

/// Read a symmetric sparse matrix in coordinate format.
pub fn read_sym_sparse<T: Scalar>(path: impl AsRef<Path>) -> Result<SymSparseMatrix<T>, MmError> {
    let text = fs::read_to_string(path)?;
    read_sym_sparse_str(&text)
}

pub fn read_sym_sparse_str<T: Scalar>(text: &str) -> Result<SymSparseMatrix<T>, MmError> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| parse_err(0, "empty file"))?;
    let header = parse_header(first)?;
    if header.format != "coordinate" {
        return Err(MmError::Unsupported(format!(
            "format '{}' (need coordinate)",
            header.format
        )));
    }
    if header.symmetry != "symmetric" {
        return Err(MmError::Unsupported(format!(
            "symmetry '{}' (need symmetric)",
            header.symmetry
        )));
    }
    if header.field != T::FIELD {
        return Err(MmError::FieldMismatch { expected: T::FIELD, found: header.field });
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets: Vec<(usize, usize, T)> = Vec::new();
    for (lno, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                if toks.len() != 3 {
                    return Err(parse_err(lno, "expected 'rows cols nnz'"));
                }
                let r: usize = toks[0].parse().map_err(|_| parse_err(lno, "bad row count"))?;
                let c: usize = toks[1].parse().map_err(|_| parse_err(lno, "bad col count"))?;
                let z: usize = toks[2].parse().map_err(|_| parse_err(lno, "bad nnz"))?;
                if r != c {
                    return Err(MmError::Invalid(format!("symmetric matrix must be square, got {r}x{c}")));
                }
                size = Some((r, c, z));
                triplets.reserve(z);
            }
            Some((n, _, _)) => {
                if toks.len() < 2 {
                    return Err(parse_err(lno, "expected 'i j value...'"));
                }
                let i: usize = toks[0].parse().map_err(|_| parse_err(lno, "bad row index"))?;
                let j: usize = toks[1].parse().map_err(|_| parse_err(lno, "bad col index"))?;
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(parse_err(lno, format!("index ({i},{j}) out of 1..={n}")));
                }
                let v = parse_value::<T>(&toks[2..], lno)?;
                triplets.push((i - 1, j - 1, v));
            }
        }
    }
    let (n, _, nnz) = size.ok_or_else(|| MmError::Invalid("missing size line".into()))?;
    if triplets.len() != nnz {
        return Err(MmError::Invalid(format!(
            "size line promised {nnz} entries, file has {}",
            triplets.len()
        )));
    }
    SymSparseMatrix::from_triplets(n, triplets)
        .map_err(|e| MmError::Invalid(e.to_string()))
}

/// Write a symmetric sparse matrix (lower triangle, coordinate format).
pub fn write_sym_sparse<T: Scalar>(
    path: impl AsRef<Path>,
    a: &SymSparseMatrix<T>,
) -> Result<(), MmError> {
    fs::write(path, sym_sparse_to_string(a))?;
    Ok(())
}

pub fn sym_sparse_to_string<T: Scalar>(a: &SymSparseMatrix<T>) -> String {
    let field = match T::FIELD {
        ScalarField::Real => "real",
        ScalarField::Complex => "complex",
    };
    let mut out = String::new();
    let _ = writeln!(out, "%%MatrixMarket matrix coordinate {field} symmetric");
    let _ = writeln!(out, "{} {} {}", a.n(), a.n(), a.nnz());
    for j in 0..a.n() {
        let (rows, vals) = a.col(j);
        for (r, v) in rows.iter().zip(vals) {
            let _ = write!(out, "{} {} ", *r as usize + 1, j + 1);
            write_value(&mut out, *v);
            out.push('\n');
        }
    }
    out
}

/// Read a dense panel (MatrixMarket `array` format, column-major, general).
pub fn read_dense<T: Scalar>(path: impl AsRef<Path>) -> Result<DenseMatrix<T>, MmError> {
    let text = fs::read_to_string(path)?;
    read_dense_str(&text)
}

pub fn read_dense_str<T: Scalar>(text: &str) -> Result<DenseMatrix<T>, MmError> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| parse_err(0, "empty file"))?;
    let header = parse_header(first)?;
    if header.format != "array" {
        return Err(MmError::Unsupported(format!("format '{}' (need array)", header.format)));
    }
    if header.symmetry != "general" {
        return Err(MmError::Unsupported(format!(
            "symmetry '{}' (need general)",
            header.symmetry
        )));
    }
    if header.field != T::FIELD {
        return Err(MmError::FieldMismatch { expected: T::FIELD, found: header.field });
    }
    let mut size: Option<(usize, usize)> = None;
    let mut vals: Vec<T> = Vec::new();
    for (lno, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                if toks.len() != 2 {
                    return Err(parse_err(lno, "expected 'rows cols'"));
                }
                let r: usize = toks[0].parse().map_err(|_| parse_err(lno, "bad row count"))?;
                let c: usize = toks[1].parse().map_err(|_| parse_err(lno, "bad col count"))?;
                size = Some((r, c));
                vals.reserve(r * c);
            }
            Some(_) => vals.push(parse_value::<T>(&toks, lno)?),
        }
    }
    let (rows, cols) = size.ok_or_else(|| MmError::Invalid("missing size line".into()))?;
    if vals.len() != rows * cols {
        return Err(MmError::Invalid(format!(
            "array promises {} values, file has {}",
            rows * cols,
            vals.len()
        )));
    }
    // file is column-major
    let mut m = DenseMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            *m.at_mut(i, j) = vals[j * rows + i];
        }
    }
    Ok(m)
}

/// Write a dense panel in `array` format (column-major, general).
pub fn write_dense<T: Scalar>(path: impl AsRef<Path>, m: &DenseMatrix<T>) -> Result<(), MmError> {
    fs::write(path, dense_to_string(m))?;
    Ok(())
}

pub fn dense_to_string<T: Scalar>(m: &DenseMatrix<T>) -> String {
    let field = match T::FIELD {
        ScalarField::Real => "real",
        ScalarField::Complex => "complex",
    };
    let mut out = String::new();
    let _ = writeln!(out, "%%MatrixMarket matrix array {field} general");
    let _ = writeln!(out, "{} {}", m.rows(), m.cols());
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            write_value(&mut out, m.at(i, j));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn sparse_round_trip_real_bit_exact() {
        let mut rng = StdRng::seed_from_u64(7);
        let trips: Vec<(usize, usize, f64)> = (0..60)
            .map(|_| {
                let i = rng.gen_range(0..20);
                let j = rng.gen_range(0..=i);
                (i, j, rng.gen::<f64>() * 1e3 - 500.0)
            })
            .collect();
        let a = SymSparseMatrix::from_triplets(20, trips).unwrap();
        let text = sym_sparse_to_string(&a);
        let b: SymSparseMatrix<f64> = read_sym_sparse_str(&text).unwrap();
        assert_eq!(a.parts().1, b.parts().1);
        assert_eq!(a.parts().2, b.parts().2);
        let (_, _, _, av) = a.parts();
        let (_, _, _, bv) = b.parts();
        for (x, y) in av.iter().zip(bv) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn sparse_round_trip_complex_bit_exact() {
        let mut rng = StdRng::seed_from_u64(8);
        let trips: Vec<(usize, usize, Complex64)> = (0..40)
            .map(|_| {
                let i = rng.gen_range(0..12);
                let j = rng.gen_range(0..=i);
                (i, j, Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() * 1e-7))
            })
            .collect();
        let a = SymSparseMatrix::from_triplets(12, trips).unwrap();
        let b: SymSparseMatrix<Complex64> =
            read_sym_sparse_str(&sym_sparse_to_string(&a)).unwrap();
        let (_, _, _, av) = a.parts();
        let (_, _, _, bv) = b.parts();
        for (x, y) in av.iter().zip(bv) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }

    #[test]
    fn duplicates_are_summed() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n3 3 4\n1 1 1.5\n2 1 2.0\n2 1 0.5\n3 3 -1.0\n";
        let a: SymSparseMatrix<f64> = read_sym_sparse_str(text).unwrap();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(1, 0), 2.5);
        assert_eq!(a.get(0, 0), 1.5);
    }

    #[test]
    fn missing_diagonal_is_structural_zero() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n2 1 3.0\n";
        let a: SymSparseMatrix<f64> = read_sym_sparse_str(text).unwrap();
        assert_eq!(a.get(0, 0), 0.0);
        assert_eq!(a.nnz(), 1);
    }

    #[test]
    fn rejects_unsupported_kinds() {
        for bad in [
            "%%MatrixMarket matrix coordinate pattern symmetric\n2 2 1\n2 1\n",
            "%%MatrixMarket matrix coordinate integer symmetric\n2 2 1\n2 1 4\n",
            "%%MatrixMarket matrix coordinate complex hermitian\n2 2 1\n2 1 1 0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n2 1 1\n",
        ] {
            assert!(read_sym_sparse_str::<f64>(bad).is_err(), "accepted: {bad}");
        }
    }

    #[test]
    fn rejects_field_mismatch() {
        let text = "%%MatrixMarket matrix coordinate complex symmetric\n1 1 1\n1 1 2.0 1.0\n";
        match read_sym_sparse_str::<f64>(text) {
            Err(MmError::FieldMismatch { .. }) => {}
            other => panic!("expected field mismatch, got {other:?}"),
        }
    }

    #[test]
    fn header_is_case_insensitive_and_sniffable() {
        let text = "%%MatrixMarket MATRIX Coordinate REAL Symmetric\n1 1 1\n1 1 7.25\n";
        let a: SymSparseMatrix<f64> = read_sym_sparse_str(text).unwrap();
        assert_eq!(a.get(0, 0), 7.25);
        let dir = std::env::temp_dir().join("mm_sniff_test.mtx");
        fs::write(&dir, text).unwrap();
        assert_eq!(sniff_field(&dir).unwrap(), ScalarField::Real);
        fs::remove_file(&dir).ok();
    }

    #[test]
    fn dense_round_trip_column_major() {
        let mut rng = StdRng::seed_from_u64(9);
        let m = DenseMatrix::from_fn(5, 3, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let text = dense_to_string(&m);
        // spot-check the storage order: first value after the size line is (0,0),
        // second is (1,0)
        let mut data_lines = text.lines().skip(2);
        assert_eq!(data_lines.next().unwrap().parse::<f64>().unwrap(), m.at(0, 0));
        assert_eq!(data_lines.next().unwrap().parse::<f64>().unwrap(), m.at(1, 0));
        let b: DenseMatrix<f64> = read_dense_str(&text).unwrap();
        assert_eq!(b.rows(), 5);
        assert_eq!(b.cols(), 3);
        for i in 0..5 {
            for j in 0..3 {
                assert_eq!(m.at(i, j).to_bits(), b.at(i, j).to_bits());
            }
        }
    }

    #[test]
    fn wrong_entry_count_rejected() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n";
        assert!(read_sym_sparse_str::<f64>(text).is_err());
    }
}
