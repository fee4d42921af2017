//! Download-optimal private retrieval of one replicated row from `N`
//! non-communicating databases.
//!
//! Each of the `K` candidate rows is cut into subpackets of `L = N^K`
//! symbols. For every subpacket group the client builds one query plan:
//! per database, for every nonempty subset `S` of messages with `|S| = k`
//! there are exactly `(N-1)^(k-1)` sums over `S`, so the shape of the plan
//! is the same no matter which row is desired. Sums containing the desired
//! row pair one fresh desired symbol with a sum of undesired symbols that
//! some other database answers verbatim, which is what makes every desired
//! symbol recoverable while the per-database query distribution stays
//! independent of the desired index (fresh symbols are consumed in the
//! order of a private uniform permutation per message).
//!
//! Total download is exactly `(1 + 1/N + ... + 1/N^(K-1)) * s` symbols.

use crate::field::{FieldElement, FieldError, PrimeField};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PirError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("need at least 2 databases, got {0}")]
    TooFewDatabases(usize),
    #[error("need at least 1 message, got {0}")]
    NoMessages(usize),
    #[error("record length {record_len} is not a positive multiple of N^K = {subpacket}")]
    BadSubpacketing { record_len: usize, subpacket: usize },
    #[error("desired index {d} out of range [0, {k})")]
    DesiredOutOfRange { d: usize, k: usize },
    #[error("symbol index {0} exceeds subpacket length {1}")]
    SymbolOutOfRange(u32, usize),
    #[error("message index {0} exceeds message count {1}")]
    MessageOutOfRange(u16, usize),
    #[error("answer shape mismatch: database {db} sent {got} symbols, expected {want}")]
    AnswerShape { db: usize, got: usize, want: usize },
    #[error("PIR decode failure: {0}")]
    DecodeFailure(String),
    #[error("malformed query payload: {0}")]
    MalformedQuery(String),
}

/// Static parameters of one retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PirConfig {
    n_dbs: usize,
    n_messages: usize,
    subpacket_len: usize,
    repetitions: usize,
}

impl PirConfig {
    /// `record_len` is the per-row symbol count `s`; it must be a positive
    /// multiple of `N^K` so the scheme applies independently per group.
    pub fn new(n_dbs: usize, n_messages: usize, record_len: usize) -> Result<Self, PirError> {
        if n_dbs < 2 {
            return Err(PirError::TooFewDatabases(n_dbs));
        }
        if n_messages < 1 {
            return Err(PirError::NoMessages(n_messages));
        }
        let subpacket_len = n_dbs
            .checked_pow(n_messages as u32)
            .ok_or(PirError::BadSubpacketing {
                record_len,
                subpacket: usize::MAX,
            })?;
        if record_len == 0 || record_len % subpacket_len != 0 {
            return Err(PirError::BadSubpacketing {
                record_len,
                subpacket: subpacket_len,
            });
        }
        Ok(PirConfig {
            n_dbs,
            n_messages,
            subpacket_len,
            repetitions: record_len / subpacket_len,
        })
    }

    pub fn n_dbs(&self) -> usize {
        self.n_dbs
    }

    pub fn n_messages(&self) -> usize {
        self.n_messages
    }

    pub fn subpacket_len(&self) -> usize {
        self.subpacket_len
    }

    pub fn repetitions(&self) -> usize {
        self.repetitions
    }

    pub fn record_len(&self) -> usize {
        self.subpacket_len * self.repetitions
    }

    /// Sums (and therefore answer symbols) per database per group:
    /// `(N^K - 1) / (N - 1)`.
    pub fn sums_per_db(&self) -> usize {
        (self.subpacket_len - 1) / (self.n_dbs - 1)
    }

    /// Exact total download in symbols: `(1 + beta) * s`.
    pub fn download_count(&self) -> u64 {
        self.repetitions as u64 * self.n_dbs as u64 * self.sums_per_db() as u64
    }
}

/// One query: an `F_q` sum over at most one symbol per message.
///
/// Terms are kept sorted by message index; that canonical form is also the
/// wire order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SumSpec {
    terms: Vec<(u16, u32)>,
}

impl SumSpec {
    fn new(mut terms: Vec<(u16, u32)>) -> Self {
        terms.sort_unstable();
        SumSpec { terms }
    }

    pub fn arity(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[(u16, u32)] {
        &self.terms
    }

    /// Bitmask over message indices; two sums over the same subset have
    /// equal masks.
    pub fn subset_mask(&self) -> u64 {
        self.terms.iter().fold(0, |m, (msg, _)| m | 1 << msg)
    }

    /// Wire format: arity (1 byte), then per term message index (2-byte BE)
    /// and symbol index (4-byte BE).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + 6 * self.terms.len());
        out.push(self.terms.len() as u8);
        for (msg, sym) in &self.terms {
            out.extend_from_slice(&msg.to_be_bytes());
            out.extend_from_slice(&sym.to_be_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize), PirError> {
        if bytes.is_empty() {
            return Err(PirError::MalformedQuery("empty sum".into()));
        }
        let k = bytes[0] as usize;
        if bytes.len() < 1 + 6 * k {
            return Err(PirError::MalformedQuery("truncated sum".into()));
        }
        let mut terms = Vec::with_capacity(k);
        for i in 0..k {
            let off = 1 + 6 * i;
            let msg = u16::from_be_bytes([bytes[off], bytes[off + 1]]);
            let sym = u32::from_be_bytes(bytes[off + 2..off + 6].try_into().unwrap());
            terms.push((msg, sym));
        }
        for w in terms.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(PirError::MalformedQuery(
                    "terms must be sorted with distinct messages".into(),
                ));
            }
        }
        Ok((SumSpec { terms }, 1 + 6 * k))
    }
}

/// How one fresh desired symbol is recovered from the answers.
#[derive(Debug, Clone)]
struct Recovery {
    /// Position in the desired message's private fresh order.
    fresh_index: usize,
    /// (database, query position) of the sum carrying the symbol.
    at: (usize, usize),
    /// (database, query position) of the verbatim side-information sum to
    /// subtract, if the carrying sum has arity > 1.
    side: Option<(usize, usize)>,
}

/// Client-side state for decoding one subpacket group.
#[derive(Debug, Clone)]
pub struct DecodeState {
    desired: usize,
    /// Fresh order -> actual symbol position, for the desired message.
    perm_desired: Vec<u32>,
    recoveries: Vec<Recovery>,
}

/// The queries for one subpacket group, plus decode bookkeeping.
#[derive(Debug, Clone)]
pub struct QueryPlan {
    pub group: usize,
    per_db: Vec<Vec<SumSpec>>,
    decode: DecodeState,
}

impl QueryPlan {
    pub fn queries_for_db(&self, db: usize) -> &[SumSpec] {
        &self.per_db[db]
    }

    pub fn n_dbs(&self) -> usize {
        self.per_db.len()
    }

    pub fn desired_index(&self) -> usize {
        self.decode.desired
    }

    /// Per-subset sum counts for one database, for structural checks.
    pub fn subset_signature(&self, db: usize) -> BTreeMap<u64, usize> {
        let mut sig = BTreeMap::new();
        for spec in &self.per_db[db] {
            *sig.entry(spec.subset_mask()).or_insert(0) += 1;
        }
        sig
    }
}

fn subsets_of_size(pool: &[u16], k: usize) -> Vec<Vec<u16>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(pool: &[u16], k: usize, start: usize, current: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..pool.len() {
            current.push(pool[i]);
            rec(pool, k, i + 1, current, out);
            current.pop();
        }
    }
    rec(pool, k, 0, &mut current, &mut out);
    out
}

/// Builds the query plan for one subpacket group.
///
/// Deterministic given the desired index and the RNG state; all randomness
/// is the per-message symbol permutation.
pub fn generate_plan<R: Rng>(
    d: usize,
    group: usize,
    cfg: &PirConfig,
    rng: &mut R,
) -> Result<QueryPlan, PirError> {
    let perms: Vec<Vec<u32>> = (0..cfg.n_messages)
        .map(|_| {
            let mut idx: Vec<u32> = (0..cfg.subpacket_len as u32).collect();
            idx.shuffle(rng);
            idx
        })
        .collect();
    generate_plan_with_perms(d, group, cfg, perms)
}

/// Database side: evaluates each sum over the stored rows of one subpacket
/// group (`rows[m]` holds the `L` symbols of message `m`).
pub fn answer(
    specs: &[SumSpec],
    rows: &[&[FieldElement]],
    field: &PrimeField,
) -> Result<Vec<FieldElement>, PirError> {
    let l = rows.first().map_or(0, |r| r.len());
    specs
        .iter()
        .map(|spec| {
            let mut acc = 0u32;
            for &(msg, sym) in spec.terms() {
                let row = rows
                    .get(msg as usize)
                    .ok_or(PirError::MessageOutOfRange(msg, rows.len()))?;
                if sym as usize >= row.len() {
                    return Err(PirError::SymbolOutOfRange(sym, l));
                }
                acc = field.add_raw(acc, row[sym as usize].value());
            }
            Ok(field.element(acc as u64))
        })
        .collect()
}

/// Client side: reconstructs the desired message's `L` symbols of one group
/// in storage order.
pub fn decode(
    answers: &[Vec<FieldElement>],
    plan: &QueryPlan,
    field: &PrimeField,
) -> Result<Vec<FieldElement>, PirError> {
    if answers.len() != plan.per_db.len() {
        return Err(PirError::DecodeFailure(format!(
            "expected {} answer lists, got {}",
            plan.per_db.len(),
            answers.len()
        )));
    }
    for (db, (ans, specs)) in answers.iter().zip(&plan.per_db).enumerate() {
        if ans.len() != specs.len() {
            return Err(PirError::AnswerShape {
                db,
                got: ans.len(),
                want: specs.len(),
            });
        }
    }
    let l = plan.decode.perm_desired.len();
    let mut out: Vec<Option<FieldElement>> = vec![None; l];
    for rec in &plan.decode.recoveries {
        let carried = answers[rec.at.0][rec.at.1];
        let value = match rec.side {
            None => carried,
            Some((db, pos)) => {
                let side = answers[db][pos];
                field.element(field.sub_raw(carried.value(), side.value()) as u64)
            }
        };
        let slot = plan.decode.perm_desired[rec.fresh_index] as usize;
        if out[slot].replace(value).is_some() {
            return Err(PirError::DecodeFailure(format!(
                "symbol {slot} recovered twice"
            )));
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or(PirError::DecodeFailure(format!("symbol {i} unrecovered"))))
        .collect()
}

// ---------------------------------------------------------------------------
// Wire payloads
// ---------------------------------------------------------------------------

/// Query payload: group index (4-byte BE), sum count (4-byte BE), sums.
pub fn encode_query_payload(group: u32, specs: &[SumSpec]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&group.to_be_bytes());
    out.extend_from_slice(&(specs.len() as u32).to_be_bytes());
    for s in specs {
        out.extend_from_slice(&s.to_bytes());
    }
    out
}

pub fn decode_query_payload(bytes: &[u8]) -> Result<(u32, Vec<SumSpec>), PirError> {
    if bytes.len() < 8 {
        return Err(PirError::MalformedQuery("short query header".into()));
    }
    let group = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
    let count = u32::from_be_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let mut specs = Vec::with_capacity(count);
    let mut off = 8;
    for _ in 0..count {
        let (spec, used) = SumSpec::from_bytes(&bytes[off..])?;
        specs.push(spec);
        off += used;
    }
    if off != bytes.len() {
        return Err(PirError::MalformedQuery("trailing bytes".into()));
    }
    Ok((group, specs))
}

/// Answer payload: group index (4-byte BE), symbol count (4-byte BE),
/// symbols (4 bytes each).
pub fn encode_answer_payload(group: u32, symbols: &[FieldElement]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&group.to_be_bytes());
    out.extend_from_slice(&(symbols.len() as u32).to_be_bytes());
    for s in symbols {
        out.extend_from_slice(&s.to_be_bytes());
    }
    out
}

pub fn decode_answer_payload(
    bytes: &[u8],
    field: &PrimeField,
) -> Result<(u32, Vec<FieldElement>), PirError> {
    if bytes.len() < 8 {
        return Err(PirError::MalformedQuery("short answer header".into()));
    }
    let group = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
    let count = u32::from_be_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if bytes.len() != 8 + 4 * count {
        return Err(PirError::MalformedQuery("answer length mismatch".into()));
    }
    let symbols = (0..count)
        .map(|i| FieldElement::from_be_bytes(&bytes[8 + 4 * i..], field).map_err(Into::into))
        .collect::<Result<Vec<_>, PirError>>()?;
    Ok((group, symbols))
}

/// Deterministic core of plan generation: takes the per-message symbol
/// permutations directly. The audit enumeration drives this to walk every
/// permutation tuple exactly once.
pub fn generate_plan_with_perms(
    d: usize,
    group: usize,
    cfg: &PirConfig,
    perms: Vec<Vec<u32>>,
) -> Result<QueryPlan, PirError> {
    let (n, k_msgs) = (cfg.n_dbs, cfg.n_messages);
    if d >= k_msgs {
        return Err(PirError::DesiredOutOfRange { d, k: k_msgs });
    }
    let mut fresh = vec![0usize; k_msgs];
    let mut take_fresh = |m: usize, fresh: &mut Vec<usize>| {
        let i = fresh[m];
        fresh[m] += 1;
        (i, perms[m][i])
    };
    let mut items: Vec<Vec<(SumSpec, usize)>> = vec![Vec::new(); n];
    let mut next_id = 0usize;
    let mut raw_recoveries: Vec<(usize, usize, Option<usize>)> = Vec::new();
    let mut prev_undesired: Vec<Vec<(usize, SumSpec)>> = vec![Vec::new(); n];
    for db in 0..n {
        for m in 0..k_msgs {
            let (fresh_idx, sym) = take_fresh(m, &mut fresh);
            let spec = SumSpec::new(vec![(m as u16, sym)]);
            let id = next_id;
            next_id += 1;
            if m == d {
                raw_recoveries.push((fresh_idx, id, None));
            } else {
                prev_undesired[db].push((id, spec.clone()));
            }
            items[db].push((spec, id));
        }
    }
    let undesired_pool: Vec<u16> = (0..k_msgs as u16).filter(|&m| m as usize != d).collect();
    for round in 2..=k_msgs {
        let mut round_undesired: Vec<Vec<(usize, SumSpec)>> = vec![Vec::new(); n];
        for db in 0..n {
            for other in 0..n {
                if other == db {
                    continue;
                }
                for (side_id, side_spec) in &prev_undesired[other] {
                    let (fresh_idx, sym) = take_fresh(d, &mut fresh);
                    let mut terms = side_spec.terms.clone();
                    terms.push((d as u16, sym));
                    let id = next_id;
                    next_id += 1;
                    raw_recoveries.push((fresh_idx, id, Some(*side_id)));
                    items[db].push((SumSpec::new(terms), id));
                }
            }
            let copies = (n - 1).pow(round as u32 - 1);
            for subset in subsets_of_size(&undesired_pool, round) {
                for _ in 0..copies {
                    let terms: Vec<(u16, u32)> = subset
                        .iter()
                        .map(|&m| {
                            let (_, sym) = take_fresh(m as usize, &mut fresh);
                            (m, sym)
                        })
                        .collect();
                    let spec = SumSpec::new(terms);
                    let id = next_id;
                    next_id += 1;
                    round_undesired[db].push((id, spec.clone()));
                    items[db].push((spec, id));
                }
            }
        }
        prev_undesired = round_undesired;
    }
    let mut pos_of_id: Vec<(usize, usize)> = vec![(0, 0); next_id];
    let per_db: Vec<Vec<SumSpec>> = items
        .into_iter()
        .enumerate()
        .map(|(db, mut list)| {
            list.sort_by(|a, b| (a.0.arity(), &a.0).cmp(&(b.0.arity(), &b.0)));
            list.into_iter()
                .enumerate()
                .map(|(pos, (spec, id))| {
                    pos_of_id[id] = (db, pos);
                    spec
                })
                .collect()
        })
        .collect();
    let recoveries = raw_recoveries
        .into_iter()
        .map(|(fresh_index, id, side)| Recovery {
            fresh_index,
            at: pos_of_id[id],
            side: side.map(|sid| pos_of_id[sid]),
        })
        .collect();
    Ok(QueryPlan {
        group,
        per_db,
        decode: DecodeState {
            desired: d,
            perm_desired: perms[d].clone(),
            recoveries,
        },
    })
}
