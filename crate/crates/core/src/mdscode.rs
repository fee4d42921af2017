//! Square mixing codes for the iteration message and its partition into
//! per-database exclusive shares.
//!
//! The iteration message (coefficients plus difference vector, `r + s`
//! symbols) is multiplied by an invertible non-systematic matrix and the
//! resulting codeword is cut into `N` contiguous blocks, one per database.
//! Because the code is square (rate 1), decoding requires every block; any
//! strict subset of blocks leaves the message underdetermined.

use crate::field::{FieldElement, FieldError, PrimeField};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("evaluation points must be pairwise distinct")]
    DuplicatePoints,
    #[error("field too small: need q >= {needed}, have q = {q}")]
    FieldTooSmall { needed: usize, q: u32 },
    #[error("matrix is systematic: row {0} is a standard basis vector")]
    Systematic(usize),
    #[error("message length {got} does not match code dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("share count {n_dbs} does not divide codeword length {len}")]
    UnevenSplit { len: usize, n_dbs: usize },
    #[error("incomplete share set: expected {expected} shares, got {got}")]
    IncompleteShares { expected: usize, got: usize },
    #[error("duplicate or out-of-range share for database {0}")]
    BadShareIndex(u8),
    #[error("shares belong to different iterations")]
    MixedIterations,
    #[error("malformed share encoding: {0}")]
    MalformedShare(String),
}

/// Running count of multiply-accumulate operations spent in codec paths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub macs: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    fn add_macs(&mut self, k: u64) {
        self.macs += k;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// Column-Vandermonde over distinct evaluation points.
    Vandermonde,
    /// Unit-determinant dense matrix `min(i,j)+1`, for fields too small to
    /// host `n` distinct nonzero points.
    Dense,
}

/// An invertible, non-systematic `n x n` mixing matrix with its precomputed
/// inverse. Immutable once built; encode/decode are pure functions.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    field: PrimeField,
    n: usize,
    kind: MatrixKind,
    rows: Vec<Vec<u32>>,
    inverse: Vec<Vec<u32>>,
}

impl MixingMatrix {
    /// Column-Vandermonde matrix: `entry(i, j) = points[j]^i`.
    ///
    /// Distinct points guarantee invertibility; construction additionally
    /// rejects matrices with a standard-basis row.
    pub fn vandermonde(field: PrimeField, points: &[FieldElement]) -> Result<Self, CodeError> {
        let n = points.len();
        if (field.modulus() as usize) < n {
            return Err(CodeError::FieldTooSmall {
                needed: n,
                q: field.modulus(),
            });
        }
        for (i, p) in points.iter().enumerate() {
            if p.modulus() != field.modulus() {
                return Err(FieldError::ModulusMismatch(p.modulus(), field.modulus()).into());
            }
            for other in &points[i + 1..] {
                if p == other {
                    return Err(CodeError::DuplicatePoints);
                }
            }
        }
        let mut rows = vec![vec![0u32; n]; n];
        for (j, p) in points.iter().enumerate() {
            let mut pow = 1u32 % field.modulus();
            for row in rows.iter_mut() {
                row[j] = pow;
                pow = field.mul_raw(pow, p.value());
            }
        }
        Self::finish(field, n, MatrixKind::Vandermonde, rows)
    }

    /// Dense fallback `entry(i, j) = min(i, j) + 1 mod q`: determinant 1 over
    /// any field, no standard-basis rows for q >= 3, so tiny audit fields
    /// (where a Vandermonde would need q > n points) still get a valid code.
    pub fn dense_fallback(field: PrimeField, n: usize) -> Result<Self, CodeError> {
        if field.modulus() < 3 {
            return Err(CodeError::FieldTooSmall { needed: 3, q: field.modulus() });
        }
        let q = field.modulus() as u64;
        let rows = (0..n)
            .map(|i| (0..n).map(|j| ((i.min(j) as u64 + 1) % q) as u32).collect())
            .collect();
        Self::finish(field, n, MatrixKind::Dense, rows)
    }

    /// Standard mixing matrix for dimension `n`: Vandermonde over points
    /// `1..=n` when the field is large enough, dense fallback otherwise.
    pub fn for_dimension(field: PrimeField, n: usize) -> Result<Self, CodeError> {
        if (field.modulus() as usize) > n {
            let points: Vec<_> = (1..=n as u64).map(|v| field.element(v)).collect();
            Self::vandermonde(field, &points)
        } else {
            Self::dense_fallback(field, n)
        }
    }

    fn finish(
        field: PrimeField,
        n: usize,
        kind: MatrixKind,
        rows: Vec<Vec<u32>>,
    ) -> Result<Self, CodeError> {
        if let Some(i) = find_systematic_row(&rows) {
            return Err(CodeError::Systematic(i));
        }
        let inverse = invert(&field, &rows).ok_or(CodeError::DuplicatePoints)?;
        Ok(MixingMatrix {
            field,
            n,
            kind,
            rows,
            inverse,
        })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i]
    }

    /// Codeword = matrix * message. Costs `n^2` multiply-accumulates.
    pub fn encode(
        &self,
        message: &[FieldElement],
        ops: &mut OpCounter,
    ) -> Result<Vec<FieldElement>, CodeError> {
        self.apply(&self.rows, message, ops)
    }

    /// Message = inverse * codeword. Costs `n^2` multiply-accumulates.
    pub fn decode(
        &self,
        codeword: &[FieldElement],
        ops: &mut OpCounter,
    ) -> Result<Vec<FieldElement>, CodeError> {
        self.apply(&self.inverse, codeword, ops)
    }

    fn apply(
        &self,
        matrix: &[Vec<u32>],
        input: &[FieldElement],
        ops: &mut OpCounter,
    ) -> Result<Vec<FieldElement>, CodeError> {
        if input.len() != self.n {
            return Err(CodeError::DimensionMismatch {
                got: input.len(),
                want: self.n,
            });
        }
        for e in input {
            if e.modulus() != self.field.modulus() {
                return Err(FieldError::ModulusMismatch(e.modulus(), self.field.modulus()).into());
            }
        }
        let q = self.field.modulus() as u64;
        let out = matrix
            .iter()
            .map(|row| {
                let mut acc = 0u64;
                for (c, e) in row.iter().zip(input) {
                    acc = (acc + *c as u64 * e.value() as u64) % q;
                }
                self.field.element(acc)
            })
            .collect();
        ops.add_macs((self.n * self.n) as u64);
        Ok(out)
    }
}

fn find_systematic_row(rows: &[Vec<u32>]) -> Option<usize> {
    rows.iter().position(|row| {
        row.iter().filter(|&&v| v != 0).count() == 1 && row.iter().any(|&v| v == 1)
    })
}

/// Gauss-Jordan inverse; `None` when singular.
fn invert(field: &PrimeField, rows: &[Vec<u32>]) -> Option<Vec<Vec<u32>>> {
    let n = rows.len();
    let mut a: Vec<Vec<u32>> = rows.to_vec();
    let mut inv: Vec<Vec<u32>> = (0..n)
        .map(|i| (0..n).map(|j| u32::from(i == j)).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| a[r][col] != 0)?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let scale = field.inv_raw(a[col][col]).ok()?;
        for j in 0..n {
            a[col][j] = field.mul_raw(a[col][j], scale);
            inv[col][j] = field.mul_raw(inv[col][j], scale);
        }
        for r in 0..n {
            if r != col && a[r][col] != 0 {
                let factor = a[r][col];
                for j in 0..n {
                    let t = field.mul_raw(factor, a[col][j]);
                    a[r][j] = field.sub_raw(a[r][j], t);
                    let t = field.mul_raw(factor, inv[col][j]);
                    inv[r][j] = field.sub_raw(inv[r][j], t);
                }
            }
        }
    }
    Some(inv)
}

/// Row rank by Gaussian elimination; used to certify that strict share
/// subsets leave the decode underdetermined.
pub fn row_rank(field: &PrimeField, rows: &[Vec<u32>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let cols = rows[0].len();
    let mut a: Vec<Vec<u32>> = rows.to_vec();
    let mut rank = 0;
    for col in 0..cols {
        if rank == a.len() {
            break;
        }
        if let Some(p) = (rank..a.len()).find(|&r| a[r][col] != 0) {
            a.swap(rank, p);
            let scale = field.inv_raw(a[rank][col]).unwrap();
            for j in 0..cols {
                a[rank][j] = field.mul_raw(a[rank][j], scale);
            }
            for r in 0..a.len() {
                if r != rank && a[r][col] != 0 {
                    let factor = a[r][col];
                    for j in 0..cols {
                        let t = field.mul_raw(factor, a[rank][j]);
                        a[r][j] = field.sub_raw(a[r][j], t);
                    }
                }
            }
            rank += 1;
        }
    }
    rank
}

/// The block of coded symbols held exclusively by one database.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExclusiveShare {
    pub db_index: u8,
    pub iteration: u64,
    pub symbols: Vec<FieldElement>,
}

impl ExclusiveShare {
    /// Wire format: db_index (1 byte), iteration (8-byte BE),
    /// symbol count (4-byte BE), symbols (4 bytes each).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + 4 * self.symbols.len());
        out.push(self.db_index);
        out.extend_from_slice(&self.iteration.to_be_bytes());
        out.extend_from_slice(&(self.symbols.len() as u32).to_be_bytes());
        for s in &self.symbols {
            out.extend_from_slice(&s.to_be_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], field: &PrimeField) -> Result<Self, CodeError> {
        if bytes.len() < 13 {
            return Err(CodeError::MalformedShare(format!(
                "header needs 13 bytes, got {}",
                bytes.len()
            )));
        }
        let db_index = bytes[0];
        let iteration = u64::from_be_bytes(bytes[1..9].try_into().unwrap());
        let count = u32::from_be_bytes(bytes[9..13].try_into().unwrap()) as usize;
        if bytes.len() != 13 + 4 * count {
            return Err(CodeError::MalformedShare(format!(
                "expected {} symbol bytes, got {}",
                4 * count,
                bytes.len() - 13
            )));
        }
        let symbols = (0..count)
            .map(|i| FieldElement::from_be_bytes(&bytes[13 + 4 * i..], field))
            .collect::<Result<_, _>>()?;
        Ok(ExclusiveShare {
            db_index,
            iteration,
            symbols,
        })
    }
}

/// Cuts a codeword into `n_dbs` contiguous equal blocks; share `i` (1-based)
/// covers symbols `[(i-1)*len/N, i*len/N)`.
pub fn split_shares(
    codeword: &[FieldElement],
    n_dbs: usize,
    iteration: u64,
) -> Result<Vec<ExclusiveShare>, CodeError> {
    if n_dbs == 0 || codeword.len() % n_dbs != 0 {
        return Err(CodeError::UnevenSplit {
            len: codeword.len(),
            n_dbs,
        });
    }
    let block = codeword.len() / n_dbs;
    Ok((0..n_dbs)
        .map(|i| ExclusiveShare {
            db_index: (i + 1) as u8,
            iteration,
            symbols: codeword[i * block..(i + 1) * block].to_vec(),
        })
        .collect())
}

/// Reassembles the full codeword from all `n_dbs` shares (any order).
pub fn join_shares(shares: &[ExclusiveShare], n_dbs: usize) -> Result<Vec<FieldElement>, CodeError> {
    if shares.len() != n_dbs {
        return Err(CodeError::IncompleteShares {
            expected: n_dbs,
            got: shares.len(),
        });
    }
    let iteration = shares[0].iteration;
    let block = shares[0].symbols.len();
    let mut slots: Vec<Option<&ExclusiveShare>> = vec![None; n_dbs];
    for share in shares {
        if share.iteration != iteration {
            return Err(CodeError::MixedIterations);
        }
        let idx = share.db_index as usize;
        if idx == 0 || idx > n_dbs || slots[idx - 1].is_some() || share.symbols.len() != block {
            return Err(CodeError::BadShareIndex(share.db_index));
        }
        slots[idx - 1] = Some(share);
    }
    let mut codeword = Vec::with_capacity(block * n_dbs);
    for slot in slots {
        codeword.extend_from_slice(&slot.unwrap().symbols);
    }
    Ok(codeword)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn f(q: u32) -> PrimeField {
        PrimeField::new(q).unwrap()
    }

    /// Independent determinant oracle: cofactor expansion along the first row.
    fn det_cofactor(field: &PrimeField, m: &[Vec<u32>]) -> u32 {
        let n = m.len();
        if n == 1 {
            return m[0][0];
        }
        let mut det = 0u32;
        for j in 0..n {
            let minor: Vec<Vec<u32>> = m[1..]
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|(k, _)| *k != j)
                        .map(|(_, &v)| v)
                        .collect()
                })
                .collect();
            let term = field.mul_raw(m[0][j], det_cofactor(field, &minor));
            det = if j % 2 == 0 {
                field.add_raw(det, term)
            } else {
                field.sub_raw(det, term)
            };
        }
        det
    }

    #[test]
    fn vandermonde_2x2_rows() {
        let f5 = f(5);
        let m = MixingMatrix::vandermonde(f5, &[f5.element(1), f5.element(2)]).unwrap();
        assert_eq!(m.row(0), &[1, 1]);
        assert_eq!(m.row(1), &[1, 2]);
    }

    #[test]
    fn duplicate_points_rejected() {
        let f5 = f(5);
        let err = MixingMatrix::vandermonde(f5, &[f5.element(1), f5.element(1)]).unwrap_err();
        assert_eq!(err, CodeError::DuplicatePoints);
    }

    #[test]
    fn vandermonde_3x3_determinant_nonzero() {
        let f7 = f(7);
        let pts: Vec<_> = [1u64, 2, 3].iter().map(|&v| f7.element(v)).collect();
        let m = MixingMatrix::vandermonde(f7, &pts).unwrap();
        let rows: Vec<Vec<u32>> = (0..3).map(|i| m.row(i).to_vec()).collect();
        assert_ne!(det_cofactor(&f7, &rows), 0);
    }

    #[test]
    fn systematic_rows_rejected() {
        // Points (0, 1) give second row (0, 1) = e_2.
        let f5 = f(5);
        let err = MixingMatrix::vandermonde(f5, &[f5.element(0), f5.element(1)]).unwrap_err();
        assert_eq!(err, CodeError::Systematic(1));
    }

    #[test]
    fn encode_examples() {
        let f5 = f(5);
        let m = MixingMatrix::vandermonde(f5, &[f5.element(1), f5.element(2)]).unwrap();
        let mut ops = OpCounter::new();

        let zero = vec![f5.zero(); 2];
        assert!(m.encode(&zero, &mut ops).unwrap().iter().all(|e| e.is_zero()));

        let msg = vec![f5.element(3), f5.element(4)];
        let cw = m.encode(&msg, &mut ops).unwrap();
        assert_eq!(cw, vec![f5.element(2), f5.element(1)]);
        assert_eq!(m.decode(&cw, &mut ops).unwrap(), msg);

        let wrong = vec![f5.element(1); 3];
        assert!(matches!(
            m.encode(&wrong, &mut ops),
            Err(CodeError::DimensionMismatch { got: 3, want: 2 })
        ));
    }

    #[test]
    fn decode_examples() {
        let f5 = f(5);
        let m = MixingMatrix::vandermonde(f5, &[f5.element(1), f5.element(2)]).unwrap();
        let mut ops = OpCounter::new();
        let zero = vec![f5.zero(); 2];
        assert!(m.decode(&zero, &mut ops).unwrap().iter().all(|e| e.is_zero()));
        assert_eq!(
            m.decode(&[f5.element(2), f5.element(1)], &mut ops).unwrap(),
            vec![f5.element(3), f5.element(4)]
        );
    }

    #[test]
    fn round_trip_random_messages() {
        let f65537 = f(65537);
        let m = MixingMatrix::for_dimension(f65537, 6).unwrap();
        assert_eq!(m.kind(), MatrixKind::Vandermonde);
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        let mut ops = OpCounter::new();
        for _ in 0..100 {
            let msg: Vec<_> = (0..6).map(|_| f65537.element(rng.gen())).collect();
            let cw = m.encode(&msg, &mut ops).unwrap();
            assert_eq!(m.decode(&cw, &mut ops).unwrap(), msg);
        }
        // n^2 multiply-accumulates per application.
        assert_eq!(ops.macs, 200 * 36);
    }

    #[test]
    fn dense_fallback_small_field() {
        let f3 = f(3);
        let m = MixingMatrix::for_dimension(f3, 6).unwrap();
        assert_eq!(m.kind(), MatrixKind::Dense);
        let mut ops = OpCounter::new();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(9);
        for _ in 0..50 {
            let msg: Vec<_> = (0..6).map(|_| f3.element(rng.gen())).collect();
            let cw = m.encode(&msg, &mut ops).unwrap();
            assert_eq!(m.decode(&cw, &mut ops).unwrap(), msg);
        }
    }

    #[test]
    fn strict_share_subsets_are_rank_deficient() {
        let f7 = f(7);
        let m = MixingMatrix::for_dimension(f7, 6).unwrap();
        // Each database block of rows has full row rank but rank < n, so the
        // message stays underdetermined from any strict subset.
        for n_dbs in [2usize, 3] {
            let block = 6 / n_dbs;
            for db in 0..n_dbs {
                let rows: Vec<Vec<u32>> = (db * block..(db + 1) * block)
                    .map(|i| m.row(i).to_vec())
                    .collect();
                assert_eq!(row_rank(&f7, &rows), block);
                assert!(block < 6);
            }
        }
    }

    #[test]
    fn split_join_examples() {
        let f5 = f(5);
        let cw: Vec<_> = (0..6).map(|v| f5.element(v)).collect();
        let shares = split_shares(&cw, 2, 3).unwrap();
        assert_eq!(shares.len(), 2);
        assert!(shares.iter().all(|s| s.symbols.len() == 3));
        assert_eq!(join_shares(&shares, 2).unwrap(), cw);

        let shares3 = split_shares(&cw, 3, 0).unwrap();
        assert!(shares3.iter().all(|s| s.symbols.len() == 2));
        assert_eq!(
            join_shares(&shares3[..2], 3).unwrap_err(),
            CodeError::IncompleteShares {
                expected: 3,
                got: 2
            }
        );

        assert!(matches!(
            split_shares(&cw, 4, 0),
            Err(CodeError::UnevenSplit { len: 6, n_dbs: 4 })
        ));
    }

    #[test]
    fn join_rejects_mixed_iterations_and_duplicates() {
        let f5 = f(5);
        let cw: Vec<_> = (0..6).map(|v| f5.element(v)).collect();
        let mut shares = split_shares(&cw, 2, 3).unwrap();
        shares[1].iteration = 4;
        assert_eq!(join_shares(&shares, 2).unwrap_err(), CodeError::MixedIterations);
        let mut dup = split_shares(&cw, 2, 3).unwrap();
        dup[1].db_index = 1;
        assert_eq!(join_shares(&dup, 2).unwrap_err(), CodeError::BadShareIndex(1));
    }

    proptest! {
        #[test]
        fn split_join_round_trip(len_blocks in 1usize..6, n_dbs in 1usize..5, seed in any::<u64>()) {
            let f5 = f(5);
            let len = len_blocks * n_dbs;
            let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
            let cw: Vec<_> = (0..len).map(|_| f5.element(rng.gen())).collect();
            let mut shares = split_shares(&cw, n_dbs, 1).unwrap();
            // join accepts shares in any order
            shares.reverse();
            prop_assert_eq!(join_shares(&shares, n_dbs).unwrap(), cw);
        }

        #[test]
        fn share_wire_round_trip(count in 0usize..8, seed in any::<u64>(), db in 1u8..4, iter in any::<u64>()) {
            let f65537 = f(65537);
            let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
            let share = ExclusiveShare {
                db_index: db,
                iteration: iter,
                symbols: (0..count).map(|_| f65537.element(rng.gen())).collect(),
            };
            let back = ExclusiveShare::from_bytes(&share.to_bytes(), &f65537).unwrap();
            prop_assert_eq!(share, back);
        }

        #[test]
        fn encode_then_decode_is_identity(seed in any::<u64>()) {
            let f31 = f(31);
            let m = MixingMatrix::for_dimension(f31, 8).unwrap();
            let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
            let msg: Vec<_> = (0..8).map(|_| f31.element(rng.gen())).collect();
            let mut ops = OpCounter::new();
            let cw = m.encode(&msg, &mut ops).unwrap();
            prop_assert_eq!(m.decode(&cw, &mut ops).unwrap(), msg);
        }
    }
}
