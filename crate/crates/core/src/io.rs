//! Text interchange: path CSV, matrix CSV, and config fingerprints.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::dynamics::SimPath;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Incremental SHA-256 over typed fields. Floats are hashed by bit pattern
/// so the digest is exact, not formatting dependent.
pub struct Fingerprint(Sha256);

impl Fingerprint {
    pub fn new(domain: &str) -> Self {
        let mut h = Sha256::new();
        h.update(domain.as_bytes());
        h.update([0u8]);
        Self(h)
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.0.update(v.to_le_bytes());
        self
    }

    pub fn usize(&mut self, v: usize) -> &mut Self {
        self.u64(v as u64)
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.u64(v.to_bits())
    }

    pub fn f64s(&mut self, v: &[f64]) -> &mut Self {
        self.usize(v.len());
        for &x in v {
            self.f64(x);
        }
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.usize(s.len());
        self.0.update(s.as_bytes());
        self
    }

    pub fn matrix(&mut self, m: &DenseMatrix) -> &mut Self {
        self.usize(m.rows()).usize(m.cols()).f64s(m.as_slice())
    }

    pub fn hex(&self) -> String {
        self.0
            .clone()
            .finalize()
            .iter()
            .fold(String::with_capacity(64), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }
}

/// Shortest-roundtrip is not fixed width; 17 significant digits in
/// scientific notation always round-trips an f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn path_to_csv(path: &SimPath) -> String {
    let n = path.n();
    let mut s = String::from("t");
    for j in 1..=n {
        let _ = write!(s, ",z{j}");
    }
    s.push('\n');
    for t in 0..path.len() {
        let _ = write!(s, "{}", t + 1);
        for &x in path.state(t) {
            s.push(',');
            s.push_str(&fmt_f64(x));
        }
        s.push('\n');
    }
    s
}

pub fn path_from_csv(text: &str) -> Result<SimPath> {
    let mut lines = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty path file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return Err(Error::Parse(format!(
            "path header must start with 't,z1,...', got '{header}'"
        )));
    }
    for (j, c) in cols.iter().enumerate().skip(1) {
        if *c != format!("z{j}") {
            return Err(Error::Parse(format!(
                "unexpected column '{c}' in path header"
            )));
        }
    }
    let n = cols.len() - 1;
    let mut data = Vec::new();
    let mut rows = 0;
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != n + 1 {
            return Err(Error::Parse(format!(
                "row {} has {} fields, expected {}",
                lineno + 2,
                fields.len(),
                n + 1
            )));
        }
        for f in &fields[1..] {
            data.push(parse_f64(f, lineno + 2)?);
        }
        rows += 1;
    }
    let states = DenseMatrix::new(rows, n, data)?;
    SimPath::from_states(states)
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("line {line}: non-finite value '{s}'")));
    }
    Ok(v)
}

/// `# n=<n>` then `n` comma-separated rows.
pub fn matrix_to_csv(m: &DenseMatrix) -> String {
    let mut s = format!("# n={}\n", m.rows());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|&x| fmt_f64(x)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn matrix_from_csv(text: &str) -> Result<DenseMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let n: usize = header
        .trim()
        .strip_prefix("# n=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("matrix header must be '# n=<n>', got '{header}'")))?;
    let mut data = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (k, line) in lines.enumerate() {
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != n {
            return Err(Error::Parse(format!(
                "matrix row {} has {} entries, expected {n}",
                k + 1,
                fields.len()
            )));
        }
        for f in fields {
            data.push(parse_f64(f, k + 2)?);
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Parse(format!(
            "matrix has {rows} rows, header says {n}"
        )));
    }
    DenseMatrix::new(n, n, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matrix_csv_rejects_malformed() {
        assert!(matches!(
            matrix_from_csv("1,2\n3,4\n"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            matrix_from_csv("# n=2\n1,2\n3\n"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            matrix_from_csv("# n=2\n1,2\n3,x\n"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            matrix_from_csv("# n=2\n1,2\n"),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn path_csv_header() {
        let p = SimPath::from_states(
            DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(),
        )
        .unwrap();
        let csv = path_to_csv(&p);
        assert!(csv.starts_with("t,z1,z2\n1,"));
        assert!(matches!(
            path_from_csv("t,z2\n1,0\n2,0\n"),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn fingerprint_distinguishes_fields() {
        let a = Fingerprint::new("x").f64(1.0).hex();
        let b = Fingerprint::new("x").f64(1.0 + f64::EPSILON).hex();
        assert_ne!(a, b);
        assert_eq!(a.len(), 64);
    }

    proptest! {
        #[test]
        fn path_and_matrix_roundtrip_exactly(
            t in 2usize..8, n in 1usize..5,
            vals in prop::collection::vec(-1e12f64..1e12, 40)
        ) {
            let states = DenseMatrix::from_fn(t, n, |i, j| vals[(i * n + j) % vals.len()] * (1.0 + 1e-13 * j as f64));
            let p = SimPath::from_states(states.clone()).unwrap();
            let back = path_from_csv(&path_to_csv(&p)).unwrap();
            prop_assert_eq!(back.states.as_slice(), states.as_slice());

            let m = DenseMatrix::from_fn(n, n, |i, j| vals[(i * 7 + j) % vals.len()] / 3.0);
            prop_assert_eq!(matrix_from_csv(&matrix_to_csv(&m)).unwrap(), m);
        }
    }
}
