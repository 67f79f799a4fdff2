use std::io::{self, Write};

use crate::linalg::CsrMatrix;

/// Writes `a` in Matrix Market coordinate format, entries sorted by row then
/// column, 1-based, 17 significant digits.
pub fn write_matrix_market<W: Write>(a: &CsrMatrix, mut out: W) -> io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", a.n(), a.n(), a.nnz())?;
    for (i, j, v) in a.iter() {
        writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v)?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_entries() {
        let a = CsrMatrix::from_triplets(2, vec![(1, 0, -1.0), (0, 0, 2.0), (0, 1, -1.0), (1, 1, 1.0 / 3.0)]);
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "%%MatrixMarket matrix coordinate real general");
        assert_eq!(lines[1], "2 2 4");
        assert_eq!(lines[2], "1 1 2.0000000000000000e0");
        assert_eq!(lines[3], "1 2 -1.0000000000000000e0");
        assert_eq!(lines[4], "2 1 -1.0000000000000000e0");
        let v: f64 = lines[5].split_whitespace().nth(2).unwrap().parse().unwrap();
        assert_eq!(v, 1.0 / 3.0);
    }
}
