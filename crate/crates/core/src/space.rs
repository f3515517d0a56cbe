//! Architecture search space: block genomes, random sampling, and mutation.
//!
//! A genome is an ordered list of convolutional blocks plus a classifier
//! head. Every block is conv → batch norm → ReLU with optional pooling and
//! dropout; the head is flatten or global average pooling, an optional dense
//! layer, and the classifier. Genomes carry a one-line-per-block text
//! encoding used by the CLI and the model file.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::cost::out_len;

/// Attempts before random generation or mutation gives up; a well-formed
/// space virtually never needs more than a few.
pub const RETRY_CAP: usize = 25;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("no valid genome found in {0} attempts; bounds conflict with the input length")]
    ExhaustedRetries(usize),
    #[error("illegal shape at block {block}: {detail}")]
    Shape { block: usize, detail: String },
    #[error("illegal genome: {0}")]
    IllegalGenome(String),
    #[error("genome text line {line}: {detail}")]
    Parse { line: usize, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Padding {
    Same,
    Valid,
}

/// Pooling attached to a block; the payload is the pool size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pool {
    None,
    Max(usize),
    Avg(usize),
}

impl Pool {
    pub fn size(&self) -> Option<usize> {
        match *self {
            Pool::None => None,
            Pool::Max(n) | Pool::Avg(n) => Some(n),
        }
    }
}

/// Pooling kind without its size, used when drawing from bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoolKind {
    None,
    Max,
    Avg,
}

/// One conv → batch norm → ReLU block with optional pooling and dropout.
/// Activation is fixed to ReLU and batch normalization is always present,
/// so neither is a field.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: Padding,
    pub pool: Pool,
    pub dropout: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeadPool {
    Flatten,
    GlobalAvg,
}

/// Classifier head: spatial collapse, optional dense layer (0 = absent),
/// and the final class count.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub pool: HeadPool,
    pub dense_units: usize,
    pub num_classes: usize,
}

/// A candidate architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct Genome {
    pub blocks: Vec<Block>,
    pub head: Head,
}

/// Finite choice sets the sampler and mutator draw from.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceBounds {
    pub filters_choices: Vec<usize>,
    pub kernel_choices: Vec<usize>,
    pub stride_choices: Vec<usize>,
    pub padding_choices: Vec<Padding>,
    pub pool_kind_choices: Vec<PoolKind>,
    pub pool_size_choices: Vec<usize>,
    pub dropout_choices: Vec<f64>,
    pub max_blocks: usize,
    pub dense_units_choices: Vec<usize>,
    pub head_pool_choices: Vec<HeadPool>,
}

impl Default for SpaceBounds {
    /// Tiny-model regime: spans sub-100k-parameter networks on 784-byte
    /// inputs while still allowing multi-block depth.
    fn default() -> Self {
        SpaceBounds {
            filters_choices: vec![8, 16, 24, 32, 48, 64],
            kernel_choices: vec![3, 5, 7, 9, 15, 25],
            stride_choices: vec![1, 2],
            padding_choices: vec![Padding::Same, Padding::Valid],
            pool_kind_choices: vec![PoolKind::None, PoolKind::Max, PoolKind::Avg],
            pool_size_choices: vec![2, 3],
            dropout_choices: vec![0.0, 0.1, 0.25, 0.5],
            max_blocks: 6,
            dense_units_choices: vec![0, 32, 64, 128],
            head_pool_choices: vec![HeadPool::GlobalAvg, HeadPool::Flatten],
        }
    }
}

impl SpaceBounds {
    pub fn validate(&self) -> Result<(), SpaceError> {
        let nonempty: [(&str, bool); 8] = [
            ("filters_choices", self.filters_choices.is_empty()),
            ("kernel_choices", self.kernel_choices.is_empty()),
            ("stride_choices", self.stride_choices.is_empty()),
            ("padding_choices", self.padding_choices.is_empty()),
            ("pool_kind_choices", self.pool_kind_choices.is_empty()),
            ("dropout_choices", self.dropout_choices.is_empty()),
            ("dense_units_choices", self.dense_units_choices.is_empty()),
            ("head_pool_choices", self.head_pool_choices.is_empty()),
        ];
        for (name, empty) in nonempty {
            if empty {
                return Err(SpaceError::IllegalGenome(format!("{name} is empty")));
            }
        }
        let pools_possible =
            self.pool_kind_choices.iter().any(|k| !matches!(k, PoolKind::None));
        if pools_possible && self.pool_size_choices.is_empty() {
            return Err(SpaceError::IllegalGenome("pool_size_choices is empty".into()));
        }
        if self.max_blocks == 0 {
            return Err(SpaceError::IllegalGenome("max_blocks must be ≥ 1".into()));
        }
        if let Some(k) = self.kernel_choices.iter().find(|&&k| k % 2 == 0 || k == 0) {
            return Err(SpaceError::IllegalGenome(format!(
                "kernel choice {k} is not a positive odd integer"
            )));
        }
        if let Some(p) = self.pool_size_choices.iter().find(|&&p| p < 2) {
            return Err(SpaceError::IllegalGenome(format!("pool size choice {p} < 2")));
        }
        if let Some(d) = self.dropout_choices.iter().find(|&&d| !(0.0..=0.5).contains(&d)) {
            return Err(SpaceError::IllegalGenome(format!(
                "dropout choice {d} outside [0, 0.5]"
            )));
        }
        if self.filters_choices.contains(&0) || self.stride_choices.contains(&0) {
            return Err(SpaceError::IllegalGenome("filters and stride must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Spatial lengths around one block: conv input, conv output, block output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockShape {
    pub l_in: usize,
    pub l_conv: usize,
    pub l_out: usize,
}

/// Field-level legality: positive odd kernels, pool sizes ≥ 2, dropout in
/// [0, 0.5], at least one block, at least two classes.
fn check_fields(g: &Genome) -> Result<(), SpaceError> {
    if g.blocks.is_empty() {
        return Err(SpaceError::IllegalGenome("genome has no blocks".into()));
    }
    // blocks are numbered from 1 in messages: "block 1" is the first block
    for (i, b) in g.blocks.iter().enumerate() {
        let ord = i + 1;
        if b.filters == 0 {
            return Err(SpaceError::IllegalGenome(format!("block {ord}: filters must be ≥ 1")));
        }
        if b.kernel == 0 || b.kernel % 2 == 0 {
            return Err(SpaceError::IllegalGenome(format!(
                "block {ord}: kernel {} is not a positive odd integer",
                b.kernel
            )));
        }
        if b.stride == 0 {
            return Err(SpaceError::IllegalGenome(format!("block {ord}: stride must be ≥ 1")));
        }
        if let Some(ps) = b.pool.size() {
            if ps < 2 {
                return Err(SpaceError::IllegalGenome(format!(
                    "block {ord}: pool size {ps} < 2"
                )));
            }
        }
        if !(0.0..=0.5).contains(&b.dropout) {
            return Err(SpaceError::IllegalGenome(format!(
                "block {ord}: dropout {} outside [0, 0.5]",
                b.dropout
            )));
        }
    }
    if g.head.num_classes < 2 {
        return Err(SpaceError::IllegalGenome(format!(
            "head: {} classes; a classifier needs at least 2",
            g.head.num_classes
        )));
    }
    Ok(())
}

/// Propagates the spatial length through every block.
///
/// Convolution follows the out_len rule; pooling requires its input length
/// to be at least the pool size and maps `L → floor(L / pool_size)`. The
/// first block whose output would drop below one element is reported by its
/// 1-based ordinal.
pub fn shape_trace(g: &Genome, input_len: usize) -> Result<Vec<BlockShape>, SpaceError> {
    check_fields(g)?;
    let mut l = input_len;
    let mut trace = Vec::with_capacity(g.blocks.len());
    for (i, b) in g.blocks.iter().enumerate() {
        let l_in = l;
        let l_conv = out_len(l, b.kernel, b.stride, b.padding).map_err(|e| SpaceError::Shape {
            block: i + 1,
            detail: e.to_string(),
        })?;
        let l_out = match b.pool.size() {
            None => l_conv,
            Some(ps) => {
                if l_conv < ps {
                    return Err(SpaceError::Shape {
                        block: i + 1,
                        detail: format!("pool size {ps} exceeds input length {l_conv}"),
                    });
                }
                l_conv / ps
            }
        };
        debug_assert!(l_out >= 1);
        trace.push(BlockShape { l_in, l_conv, l_out });
        l = l_out;
    }
    Ok(trace)
}

/// Structural legality of a genome on the given input length.
pub fn validate(g: &Genome, input_len: usize) -> Result<(), SpaceError> {
    shape_trace(g, input_len).map(|_| ())
}

fn pick<T: Copy>(choices: &[T], rng: &mut impl Rng) -> T {
    *choices.choose(rng).expect("choice sets are validated non-empty")
}

fn random_block(bounds: &SpaceBounds, rng: &mut impl Rng) -> Block {
    let pool = match pick(&bounds.pool_kind_choices, rng) {
        PoolKind::None => Pool::None,
        PoolKind::Max => Pool::Max(pick(&bounds.pool_size_choices, rng)),
        PoolKind::Avg => Pool::Avg(pick(&bounds.pool_size_choices, rng)),
    };
    Block {
        filters: pick(&bounds.filters_choices, rng),
        kernel: pick(&bounds.kernel_choices, rng),
        stride: pick(&bounds.stride_choices, rng),
        padding: pick(&bounds.padding_choices, rng),
        pool,
        dropout: pick(&bounds.dropout_choices, rng),
    }
}

fn random_head(bounds: &SpaceBounds, num_classes: usize, rng: &mut impl Rng) -> Head {
    Head {
        pool: pick(&bounds.head_pool_choices, rng),
        dense_units: pick(&bounds.dense_units_choices, rng),
        num_classes,
    }
}

/// Draws a uniform random genome that passes [`validate`], resampling
/// whole genomes up to [`RETRY_CAP`] times.
pub fn random_genome(
    bounds: &SpaceBounds,
    input_len: usize,
    num_classes: usize,
    rng: &mut impl Rng,
) -> Result<Genome, SpaceError> {
    bounds.validate()?;
    for _ in 0..RETRY_CAP {
        let num_blocks = rng.gen_range(1..=bounds.max_blocks);
        let g = Genome {
            blocks: (0..num_blocks).map(|_| random_block(bounds, rng)).collect(),
            head: random_head(bounds, num_classes, rng),
        };
        if validate(&g, input_len).is_ok() {
            return Ok(g);
        }
    }
    Err(SpaceError::ExhaustedRetries(RETRY_CAP))
}

/// Applies exactly one mutation — insert a random block, delete a block, or
/// modify one field of a block or of the head — resampling up to
/// [`RETRY_CAP`] times until the result validates and differs from `g`.
///
/// Delete is excluded on single-block genomes; insert is excluded at
/// `max_blocks`.
pub fn mutate(
    g: &Genome,
    bounds: &SpaceBounds,
    input_len: usize,
    rng: &mut impl Rng,
) -> Result<Genome, SpaceError> {
    bounds.validate()?;
    debug_assert!(validate(g, input_len).is_ok());
    for _ in 0..RETRY_CAP {
        let mut kinds = vec!["modify"];
        if g.blocks.len() < bounds.max_blocks {
            kinds.push("insert");
        }
        if g.blocks.len() > 1 {
            kinds.push("delete");
        }
        let mut child = g.clone();
        match pick(&kinds, rng) {
            "insert" => {
                let at = rng.gen_range(0..=child.blocks.len());
                child.blocks.insert(at, random_block(bounds, rng));
            }
            "delete" => {
                let at = rng.gen_range(0..child.blocks.len());
                child.blocks.remove(at);
            }
            _ => {
                // the head counts as one more mutation target after the blocks
                let target = rng.gen_range(0..=child.blocks.len());
                if target < child.blocks.len() {
                    let b = &mut child.blocks[target];
                    match rng.gen_range(0..6) {
                        0 => b.filters = pick(&bounds.filters_choices, rng),
                        1 => b.kernel = pick(&bounds.kernel_choices, rng),
                        2 => b.stride = pick(&bounds.stride_choices, rng),
                        3 => b.padding = pick(&bounds.padding_choices, rng),
                        4 => {
                            b.pool = match pick(&bounds.pool_kind_choices, rng) {
                                PoolKind::None => Pool::None,
                                PoolKind::Max => Pool::Max(pick(&bounds.pool_size_choices, rng)),
                                PoolKind::Avg => Pool::Avg(pick(&bounds.pool_size_choices, rng)),
                            }
                        }
                        _ => b.dropout = pick(&bounds.dropout_choices, rng),
                    }
                } else if rng.gen_bool(0.5) {
                    child.head.pool = pick(&bounds.head_pool_choices, rng);
                } else {
                    child.head.dense_units = pick(&bounds.dense_units_choices, rng);
                }
            }
        }
        if child != *g && validate(&child, input_len).is_ok() {
            return Ok(child);
        }
    }
    Err(SpaceError::ExhaustedRetries(RETRY_CAP))
}

impl fmt::Display for Padding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Padding::Same => "same",
            Padding::Valid => "valid",
        })
    }
}

impl fmt::Display for Pool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pool::None => f.write_str("none"),
            Pool::Max(n) => write!(f, "max:{n}"),
            Pool::Avg(n) => write!(f, "avg:{n}"),
        }
    }
}

impl fmt::Display for HeadPool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeadPool::Flatten => "flatten",
            HeadPool::GlobalAvg => "gap",
        })
    }
}

/// Text encoding: one `conv` line per block, then one `head` line.
impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.blocks {
            writeln!(
                f,
                "conv f={} k={} s={} p={} pool={} drop={}",
                b.filters, b.kernel, b.stride, b.padding, b.pool, b.dropout
            )?;
        }
        writeln!(
            f,
            "head pool={} dense={} classes={}",
            self.head.pool, self.head.dense_units, self.head.num_classes
        )
    }
}

fn parse_kv<'a>(token: &'a str, line: usize) -> Result<(&'a str, &'a str), SpaceError> {
    token.split_once('=').ok_or_else(|| SpaceError::Parse {
        line,
        detail: format!("expected key=value, found '{token}'"),
    })
}

fn parse_num<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T, SpaceError> {
    value.parse().map_err(|_| SpaceError::Parse {
        line,
        detail: format!("{key}: cannot parse '{value}'"),
    })
}

impl FromStr for Genome {
    type Err = SpaceError;

    /// Parses the text encoding. Blank lines and `#` comments are ignored;
    /// key=value pairs may appear in any order within a line; the `head`
    /// line must come last.
    fn from_str(text: &str) -> Result<Genome, SpaceError> {
        let mut blocks = Vec::new();
        let mut head: Option<Head> = None;
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = lineno + 1;
            let trimmed = raw_line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if head.is_some() {
                return Err(SpaceError::Parse {
                    line,
                    detail: "content after the head line".into(),
                });
            }
            let mut tokens = trimmed.split_whitespace();
            match tokens.next() {
                Some("conv") => {
                    let (mut f, mut k, mut s) = (None, None, None);
                    let (mut p, mut pool, mut drop) = (None, None, None);
                    for tok in tokens {
                        let (key, value) = parse_kv(tok, line)?;
                        match key {
                            "f" => f = Some(parse_num::<usize>(key, value, line)?),
                            "k" => k = Some(parse_num::<usize>(key, value, line)?),
                            "s" => s = Some(parse_num::<usize>(key, value, line)?),
                            "p" => {
                                p = Some(match value {
                                    "same" => Padding::Same,
                                    "valid" => Padding::Valid,
                                    other => {
                                        return Err(SpaceError::Parse {
                                            line,
                                            detail: format!("unknown padding '{other}'"),
                                        })
                                    }
                                })
                            }
                            "pool" => {
                                pool = Some(match value {
                                    "none" => Pool::None,
                                    other => {
                                        let (kind, n) =
                                            other.split_once(':').ok_or_else(|| {
                                                SpaceError::Parse {
                                                    line,
                                                    detail: format!("unknown pool '{other}'"),
                                                }
                                            })?;
                                        let n = parse_num::<usize>("pool", n, line)?;
                                        match kind {
                                            "max" => Pool::Max(n),
                                            "avg" => Pool::Avg(n),
                                            _ => {
                                                return Err(SpaceError::Parse {
                                                    line,
                                                    detail: format!("unknown pool '{other}'"),
                                                })
                                            }
                                        }
                                    }
                                })
                            }
                            "drop" => drop = Some(parse_num::<f64>(key, value, line)?),
                            other => {
                                return Err(SpaceError::Parse {
                                    line,
                                    detail: format!("unknown conv key '{other}'"),
                                })
                            }
                        }
                    }
                    let missing = |what: &str| SpaceError::Parse {
                        line,
                        detail: format!("conv line is missing '{what}'"),
                    };
                    blocks.push(Block {
                        filters: f.ok_or_else(|| missing("f"))?,
                        kernel: k.ok_or_else(|| missing("k"))?,
                        stride: s.ok_or_else(|| missing("s"))?,
                        padding: p.ok_or_else(|| missing("p"))?,
                        pool: pool.ok_or_else(|| missing("pool"))?,
                        dropout: drop.ok_or_else(|| missing("drop"))?,
                    });
                }
                Some("head") => {
                    let (mut pool, mut dense, mut classes) = (None, None, None);
                    for tok in tokens {
                        let (key, value) = parse_kv(tok, line)?;
                        match key {
                            "pool" => {
                                pool = Some(match value {
                                    "flatten" => HeadPool::Flatten,
                                    "gap" => HeadPool::GlobalAvg,
                                    other => {
                                        return Err(SpaceError::Parse {
                                            line,
                                            detail: format!("unknown head pool '{other}'"),
                                        })
                                    }
                                })
                            }
                            "dense" => dense = Some(parse_num::<usize>(key, value, line)?),
                            "classes" => classes = Some(parse_num::<usize>(key, value, line)?),
                            other => {
                                return Err(SpaceError::Parse {
                                    line,
                                    detail: format!("unknown head key '{other}'"),
                                })
                            }
                        }
                    }
                    let missing = |what: &str| SpaceError::Parse {
                        line,
                        detail: format!("head line is missing '{what}'"),
                    };
                    head = Some(Head {
                        pool: pool.ok_or_else(|| missing("pool"))?,
                        dense_units: dense.ok_or_else(|| missing("dense"))?,
                        num_classes: classes.ok_or_else(|| missing("classes"))?,
                    });
                }
                Some(other) => {
                    return Err(SpaceError::Parse {
                        line,
                        detail: format!("unknown line tag '{other}'"),
                    })
                }
                None => unreachable!("blank lines are skipped"),
            }
        }
        let head = head.ok_or(SpaceError::Parse {
            line: text.lines().count(),
            detail: "no head line".into(),
        })?;
        let g = Genome { blocks, head };
        check_fields(&g)?;
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SAMPLE_LEN;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_block(pool: Pool, stride: usize, padding: Padding, kernel: usize) -> Genome {
        Genome {
            blocks: vec![Block {
                filters: 8,
                kernel,
                stride,
                padding,
                pool,
                dropout: 0.0,
            }],
            head: Head { pool: HeadPool::GlobalAvg, dense_units: 0, num_classes: 4 },
        }
    }

    #[test]
    fn same_padding_stride_one_is_identity_shape() {
        let g = one_block(Pool::None, 1, Padding::Same, 3);
        let trace = shape_trace(&g, SAMPLE_LEN).unwrap();
        assert_eq!(trace, vec![BlockShape { l_in: 784, l_conv: 784, l_out: 784 }]);
    }

    #[test]
    fn repeated_halving_hits_a_shape_error_at_block_ten() {
        let block = Block {
            filters: 8,
            kernel: 3,
            stride: 1,
            padding: Padding::Same,
            pool: Pool::Max(2),
            dropout: 0.0,
        };
        // nine halvings are legal: 784 -> 392,196,98,49,24,12,6,3,1
        let g9 = Genome {
            blocks: vec![block.clone(); 9],
            head: Head { pool: HeadPool::GlobalAvg, dense_units: 0, num_classes: 4 },
        };
        let trace = shape_trace(&g9, SAMPLE_LEN).unwrap();
        let lens: Vec<usize> = trace.iter().map(|s| s.l_out).collect();
        assert_eq!(lens, vec![392, 196, 98, 49, 24, 12, 6, 3, 1]);
        // the tenth pool sees a length-1 input and fails
        let g10 = Genome { blocks: vec![block; 10], head: g9.head.clone() };
        match shape_trace(&g10, SAMPLE_LEN) {
            Err(SpaceError::Shape { block: 10, .. }) => {}
            other => panic!("expected shape error at block 10, got {other:?}"),
        }
    }

    #[test]
    fn boundary_valid_conv_on_length_three_is_legal() {
        let g = one_block(Pool::None, 2, Padding::Valid, 3);
        let trace = shape_trace(&g, 3).unwrap();
        assert_eq!(trace[0].l_out, 1);
    }

    #[test]
    fn oversized_kernel_is_a_shape_error() {
        let g = one_block(Pool::None, 1, Padding::Valid, 25);
        assert!(validate(&g, 24).is_err());
        assert!(validate(&g, 25).is_ok());
    }

    #[test]
    fn field_legality_is_enforced() {
        let mut g = one_block(Pool::None, 1, Padding::Same, 3);
        g.blocks[0].kernel = 4;
        assert!(matches!(validate(&g, 784), Err(SpaceError::IllegalGenome(_))));
        let mut g = one_block(Pool::None, 1, Padding::Same, 3);
        g.blocks[0].dropout = 0.9;
        assert!(matches!(validate(&g, 784), Err(SpaceError::IllegalGenome(_))));
        let mut g = one_block(Pool::None, 1, Padding::Same, 3);
        g.head.num_classes = 1;
        assert!(matches!(validate(&g, 784), Err(SpaceError::IllegalGenome(_))));
        let g = Genome {
            blocks: vec![],
            head: Head { pool: HeadPool::Flatten, dense_units: 0, num_classes: 4 },
        };
        assert!(matches!(validate(&g, 784), Err(SpaceError::IllegalGenome(_))));
    }

    #[test]
    fn singleton_bounds_yield_the_unique_genome() {
        let bounds = SpaceBounds {
            filters_choices: vec![16],
            kernel_choices: vec![5],
            stride_choices: vec![1],
            padding_choices: vec![Padding::Same],
            pool_kind_choices: vec![PoolKind::Max],
            pool_size_choices: vec![2],
            dropout_choices: vec![0.25],
            max_blocks: 1,
            dense_units_choices: vec![32],
            head_pool_choices: vec![HeadPool::Flatten],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = random_genome(&bounds, SAMPLE_LEN, 4, &mut rng).unwrap();
        assert_eq!(
            g,
            Genome {
                blocks: vec![Block {
                    filters: 16,
                    kernel: 5,
                    stride: 1,
                    padding: Padding::Same,
                    pool: Pool::Max(2),
                    dropout: 0.25,
                }],
                head: Head { pool: HeadPool::Flatten, dense_units: 32, num_classes: 4 },
            }
        );
    }

    #[test]
    fn random_genome_is_deterministic_per_seed() {
        let bounds = SpaceBounds::default();
        let g1 = random_genome(&bounds, SAMPLE_LEN, 11, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let g2 = random_genome(&bounds, SAMPLE_LEN, 11, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(g1, g2);
        let g3 =
            random_genome(&bounds, SAMPLE_LEN, 11, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        assert_ne!(g1, g3);
    }

    #[test]
    fn impossible_space_exhausts_retries() {
        let bounds = SpaceBounds {
            pool_kind_choices: vec![PoolKind::Max],
            pool_size_choices: vec![800], // larger than any conv output of a 784 input
            ..SpaceBounds::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            random_genome(&bounds, SAMPLE_LEN, 4, &mut rng),
            Err(SpaceError::ExhaustedRetries(RETRY_CAP))
        ));
    }

    #[test]
    fn delete_is_excluded_on_single_block_genomes() {
        let bounds = SpaceBounds::default();
        let g = one_block(Pool::None, 1, Padding::Same, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let child = mutate(&g, &bounds, SAMPLE_LEN, &mut rng).unwrap();
            assert!(!child.blocks.is_empty());
            assert_ne!(child, g);
        }
    }

    #[test]
    fn insert_is_excluded_at_max_blocks() {
        let bounds = SpaceBounds { max_blocks: 2, ..SpaceBounds::default() };
        let g = Genome {
            blocks: vec![
                one_block(Pool::None, 1, Padding::Same, 3).blocks[0].clone(),
                one_block(Pool::None, 1, Padding::Same, 5).blocks[0].clone(),
            ],
            head: Head { pool: HeadPool::GlobalAvg, dense_units: 0, num_classes: 4 },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let child = mutate(&g, &bounds, SAMPLE_LEN, &mut rng).unwrap();
            assert!(child.blocks.len() <= 2);
        }
    }

    #[test]
    fn mutation_closure_holds_over_a_thousand_draws() {
        let bounds = SpaceBounds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let parent = random_genome(&bounds, SAMPLE_LEN, 11, &mut rng).unwrap();
        for _ in 0..1000 {
            let child = mutate(&parent, &bounds, SAMPLE_LEN, &mut rng).unwrap();
            validate(&child, SAMPLE_LEN).unwrap();
            assert_ne!(child, parent);
        }
    }

    #[test]
    fn inserts_can_reach_max_blocks() {
        let bounds = SpaceBounds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut g = one_block(Pool::None, 1, Padding::Same, 3);
        let mut deepest = g.blocks.len();
        for _ in 0..500 {
            g = mutate(&g, &bounds, SAMPLE_LEN, &mut rng).unwrap();
            deepest = deepest.max(g.blocks.len());
        }
        assert_eq!(deepest, bounds.max_blocks);
    }

    #[test]
    fn text_encoding_matches_documented_format() {
        let g = Genome {
            blocks: vec![
                Block {
                    filters: 32,
                    kernel: 25,
                    stride: 1,
                    padding: Padding::Same,
                    pool: Pool::Max(2),
                    dropout: 0.25,
                },
                Block {
                    filters: 8,
                    kernel: 3,
                    stride: 2,
                    padding: Padding::Valid,
                    pool: Pool::None,
                    dropout: 0.0,
                },
            ],
            head: Head { pool: HeadPool::GlobalAvg, dense_units: 64, num_classes: 11 },
        };
        let text = g.to_string();
        assert_eq!(
            text,
            "conv f=32 k=25 s=1 p=same pool=max:2 drop=0.25\n\
             conv f=8 k=3 s=2 p=valid pool=none drop=0\n\
             head pool=gap dense=64 classes=11\n"
        );
        assert_eq!(text.parse::<Genome>().unwrap(), g);
    }

    #[test]
    fn parser_rejects_malformed_lines() {
        assert!(matches!(
            "head pool=gap dense=0".parse::<Genome>(),
            Err(SpaceError::Parse { .. })
        ));
        assert!(matches!(
            "conv f=8 k=3 s=1 p=diagonal pool=none drop=0\nhead pool=gap dense=0 classes=4"
                .parse::<Genome>(),
            Err(SpaceError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            "conv f=8 k=3 s=1 p=same pool=none drop=0".parse::<Genome>(),
            Err(SpaceError::Parse { .. })
        ));
        assert!(matches!(
            "conv f=8 k=3 s=1 p=same pool=none drop=0\n\
             head pool=gap dense=0 classes=4\n\
             conv f=8 k=3 s=1 p=same pool=none drop=0"
                .parse::<Genome>(),
            Err(SpaceError::Parse { line: 3, .. })
        ));
        // avg pool without a size
        assert!(matches!(
            "conv f=8 k=3 s=1 p=same pool=avg drop=0\nhead pool=gap dense=0 classes=4"
                .parse::<Genome>(),
            Err(SpaceError::Parse { line: 1, .. })
        ));
        // even kernel passes parsing but fails field checks
        assert!(matches!(
            "conv f=8 k=4 s=1 p=same pool=none drop=0\nhead pool=gap dense=0 classes=4"
                .parse::<Genome>(),
            Err(SpaceError::IllegalGenome(_))
        ));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# a comment\n\nconv f=8 k=3 s=1 p=same pool=none drop=0\n\nhead pool=flatten dense=0 classes=2\n";
        let g = text.parse::<Genome>().unwrap();
        assert_eq!(g.blocks.len(), 1);
        assert_eq!(g.head.pool, HeadPool::Flatten);
    }

    proptest! {
        #[test]
        fn encoding_round_trips(seed in any::<u64>()) {
            let bounds = SpaceBounds::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_genome(&bounds, SAMPLE_LEN, 11, &mut rng).unwrap();
            let text = g.to_string();
            prop_assert_eq!(text.parse::<Genome>().unwrap(), g);
        }
    }
}
