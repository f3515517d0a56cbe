//! Hardware cost model: parameter count, maximum tensor size, FLOPs, and
//! the derived Flash/RAM footprints, plus strict threshold checks and
//! baseline/ours efficiency ratios.
//!
//! Conventions (used consistently everywhere):
//! - 4 bytes per stored parameter and per tensor element; decimal MB/KB.
//! - FLOPs count a multiply-add as 2 ops; batch norm is folded to one
//!   multiply and one add per element at inference; pooling costs
//!   `pool_size` ops per output element; softmax is excluded (inference
//!   takes the argmax of the logits).
//! - The maximum tensor includes the input buffer and every materialized
//!   activation, including conv outputs that are later pooled.

use std::fmt;

use thiserror::Error;

use crate::space::{shape_trace, Genome, HeadPool, Padding, SpaceError};

#[derive(Debug, Error)]
pub enum CostError {
    #[error("kernel {kernel} exceeds input length {len}")]
    KernelTooLarge { kernel: usize, len: usize },
    #[error("cannot form ratios: {0} is zero in the reference report")]
    DivByZero(&'static str),
    #[error("threshold {0} must be positive when present")]
    BadThreshold(&'static str),
}

/// Spatial output length of a 1D convolution.
///
/// `valid`: `floor((l_in − kernel)/stride) + 1`, an error when the kernel
/// is longer than the input; `same`: `ceil(l_in / stride)`.
pub fn out_len(
    l_in: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
) -> Result<usize, CostError> {
    debug_assert!(l_in >= 1 && stride >= 1);
    match padding {
        Padding::Valid => {
            if kernel > l_in {
                return Err(CostError::KernelTooLarge { kernel, len: l_in });
            }
            Ok((l_in - kernel) / stride + 1)
        }
        Padding::Same => Ok(l_in.div_ceil(stride)),
    }
}

/// The Eq.-style constraint quantities of one architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostReport {
    /// Stored weight count |a| (conv + batch-norm + dense, incl. running stats).
    pub params: u64,
    /// Largest materialized tensor in elements |T|.
    pub max_tensor: u64,
    /// Per-inference operation count.
    pub flops: u64,
    /// 4 × params.
    pub flash_bytes: u64,
    /// 4 × max_tensor.
    pub ram_bytes: u64,
}

impl CostReport {
    pub fn params_m(&self) -> f64 {
        self.params as f64 / 1e6
    }

    pub fn flops_m(&self) -> f64 {
        self.flops as f64 / 1e6
    }

    /// Flash footprint in decimal megabytes.
    pub fn flash_mb(&self) -> f64 {
        self.flash_bytes as f64 / 1e6
    }

    /// RAM footprint in decimal kilobytes.
    pub fn ram_kb(&self) -> f64 {
        self.ram_bytes as f64 / 1e3
    }
}

/// Upper limits per Eq. 1; `None` means unconstrained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Thresholds {
    pub d_th: Option<u64>,
    pub r_th: Option<u64>,
    pub flops_th: Option<u64>,
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), CostError> {
        for (name, v) in [("d_th", self.d_th), ("r_th", self.r_th), ("flops_th", self.flops_th)]
        {
            if v == Some(0) {
                return Err(CostError::BadThreshold(name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Params,
    MaxTensor,
    Flops,
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantity::Params => "params",
            Quantity::MaxTensor => "max_tensor",
            Quantity::Flops => "flops",
        })
    }
}

/// One failed strict-inequality check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub quantity: Quantity,
    pub value: u64,
    pub threshold: u64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} = {} violates the strict bound < {}",
            self.quantity, self.value, self.threshold
        )
    }
}

/// Per-block layer walk shared by the three counters: channels and lengths
/// before/after conv and after pooling.
struct BlockWalk {
    in_ch: u64,
    filters: u64,
    kernel: u64,
    l_conv: u64,
    l_out: u64,
    pool_size: Option<u64>,
}

fn walk(g: &Genome, input_len: usize) -> Result<(Vec<BlockWalk>, u64, u64), SpaceError> {
    let trace = shape_trace(g, input_len)?;
    let mut in_ch = 1u64;
    let mut blocks = Vec::with_capacity(g.blocks.len());
    for (b, s) in g.blocks.iter().zip(&trace) {
        blocks.push(BlockWalk {
            in_ch,
            filters: b.filters as u64,
            kernel: b.kernel as u64,
            l_conv: s.l_conv as u64,
            l_out: s.l_out as u64,
            pool_size: b.pool.size().map(|p| p as u64),
        });
        in_ch = b.filters as u64;
    }
    let final_len = trace.last().map(|s| s.l_out as u64).unwrap_or(input_len as u64);
    Ok((blocks, in_ch, final_len))
}

/// Head input feature count after flatten or global average pooling.
fn head_features(g: &Genome, last_ch: u64, final_len: u64) -> u64 {
    match g.head.pool {
        HeadPool::GlobalAvg => last_ch,
        HeadPool::Flatten => last_ch * final_len,
    }
}

/// Stored weight count |a|: per block, conv `filters × (in_ch × kernel + 1)`
/// plus batch norm `4 × filters` (scale, shift, running mean, running
/// variance — all Flash-resident); head dense `(in + 1) × units` when
/// present, classifier `(in + 1) × classes`.
pub fn count_params(g: &Genome, input_len: usize) -> Result<u64, SpaceError> {
    let (blocks, last_ch, final_len) = walk(g, input_len)?;
    let mut total = 0u64;
    for b in &blocks {
        total += b.filters * (b.in_ch * b.kernel + 1); // conv weights + bias
        total += 4 * b.filters; // batch norm
    }
    let mut feat = head_features(g, last_ch, final_len);
    if g.head.dense_units > 0 {
        total += (feat + 1) * g.head.dense_units as u64;
        feat = g.head.dense_units as u64;
    }
    total += (feat + 1) * g.head.num_classes as u64;
    Ok(total)
}

/// Stored-weight subtotals per section: one entry per block (conv + batch
/// norm) followed by the head total (dense stack + classifier). The
/// subtotals sum to [`count_params`].
pub fn params_by_section(g: &Genome, input_len: usize) -> Result<(Vec<u64>, u64), SpaceError> {
    let (blocks, last_ch, final_len) = walk(g, input_len)?;
    let per_block = blocks
        .iter()
        .map(|b| b.filters * (b.in_ch * b.kernel + 1) + 4 * b.filters)
        .collect();
    let mut feat = head_features(g, last_ch, final_len);
    let mut head = 0u64;
    if g.head.dense_units > 0 {
        head += (feat + 1) * g.head.dense_units as u64;
        feat = g.head.dense_units as u64;
    }
    head += (feat + 1) * g.head.num_classes as u64;
    Ok((per_block, head))
}

/// Per-inference FLOPs under the documented conventions: conv
/// `2 × in_ch × kernel × filters × l_conv`, batch norm `2 × filters ×
/// l_conv`, ReLU one op per element, pool `pool_size` ops per output
/// element, dense `2 × in × out`.
pub fn count_flops(g: &Genome, input_len: usize) -> Result<u64, SpaceError> {
    let (blocks, last_ch, final_len) = walk(g, input_len)?;
    let mut total = 0u64;
    for b in &blocks {
        let conv_elems = b.filters * b.l_conv;
        total += 2 * b.in_ch * b.kernel * conv_elems; // conv (MAC = 2)
        total += 2 * conv_elems; // batch norm, folded scale+shift
        total += conv_elems; // ReLU
        if let Some(ps) = b.pool_size {
            total += ps * b.filters * b.l_out; // pool
        }
    }
    let mut feat = head_features(g, last_ch, final_len);
    if g.head.pool == HeadPool::GlobalAvg {
        total += final_len * last_ch; // global average reduce
    }
    if g.head.dense_units > 0 {
        let units = g.head.dense_units as u64;
        total += 2 * feat * units; // dense
        total += units; // ReLU
        feat = units;
    }
    total += 2 * feat * g.head.num_classes as u64; // classifier
    Ok(total)
}

/// Largest materialized tensor |T| in elements: the input, every conv
/// output (materialized before any pooling), every block output, and the
/// head tensors.
pub fn max_tensor(g: &Genome, input_len: usize) -> Result<u64, SpaceError> {
    let (blocks, last_ch, final_len) = walk(g, input_len)?;
    let mut m = input_len as u64; // input: length × 1 channel
    for b in &blocks {
        m = m.max(b.filters * b.l_conv).max(b.filters * b.l_out);
    }
    let feat = head_features(g, last_ch, final_len);
    m = m.max(feat);
    if g.head.dense_units > 0 {
        m = m.max(g.head.dense_units as u64);
    }
    m = m.max(g.head.num_classes as u64);
    Ok(m)
}

/// Aggregates the three counters and the 4-byte Flash/RAM footprints.
pub fn estimate_cost(g: &Genome, input_len: usize) -> Result<CostReport, SpaceError> {
    let params = count_params(g, input_len)?;
    let max_tensor = max_tensor(g, input_len)?;
    let flops = count_flops(g, input_len)?;
    Ok(CostReport {
        params,
        max_tensor,
        flops,
        flash_bytes: 4 * params,
        ram_bytes: 4 * max_tensor,
    })
}

/// Strict-inequality feasibility check; an empty list means pass.
pub fn check_constraints(c: &CostReport, t: &Thresholds) -> Vec<Violation> {
    let mut violations = Vec::new();
    let checks = [
        (Quantity::Params, c.params, t.d_th),
        (Quantity::MaxTensor, c.max_tensor, t.r_th),
        (Quantity::Flops, c.flops, t.flops_th),
    ];
    for (quantity, value, threshold) in checks {
        if let Some(th) = threshold {
            if value >= th {
                violations.push(Violation { quantity, value, threshold: th });
            }
        }
    }
    violations
}

/// Baseline-over-ours ratios, full precision; round with [`round2`] for
/// display.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratios {
    pub params: f64,
    pub max_tensor: f64,
    pub flops: f64,
    pub flash: f64,
    pub ram: f64,
}

/// Per-quantity `baseline / ours` ratios.
pub fn efficiency_ratios(baseline: &CostReport, ours: &CostReport) -> Result<Ratios, CostError> {
    let fields: [(&'static str, u64, u64); 5] = [
        ("params", baseline.params, ours.params),
        ("max_tensor", baseline.max_tensor, ours.max_tensor),
        ("flops", baseline.flops, ours.flops),
        ("flash_bytes", baseline.flash_bytes, ours.flash_bytes),
        ("ram_bytes", baseline.ram_bytes, ours.ram_bytes),
    ];
    let mut out = [0f64; 5];
    for (slot, (name, num, den)) in out.iter_mut().zip(fields) {
        if den == 0 {
            return Err(CostError::DivByZero(name));
        }
        *slot = num as f64 / den as f64;
    }
    Ok(Ratios { params: out[0], max_tensor: out[1], flops: out[2], flash: out[3], ram: out[4] })
}

/// Rounds to two decimals, the display precision of the ratio tables.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Block, Genome, Head, HeadPool, Pool};

    fn genome(blocks: Vec<Block>, head_pool: HeadPool, dense: usize, classes: usize) -> Genome {
        Genome { blocks, head: Head { pool: head_pool, dense_units: dense, num_classes: classes } }
    }

    fn block(filters: usize, kernel: usize, stride: usize, padding: Padding, pool: Pool) -> Block {
        Block { filters, kernel, stride, padding, pool, dropout: 0.0 }
    }

    #[test]
    fn out_len_matches_worked_examples() {
        assert_eq!(out_len(784, 3, 1, Padding::Same).unwrap(), 784);
        assert_eq!(out_len(784, 25, 1, Padding::Valid).unwrap(), 760);
        assert_eq!(out_len(784, 3, 2, Padding::Same).unwrap(), 392);
        assert_eq!(out_len(3, 3, 2, Padding::Valid).unwrap(), 1);
        assert_eq!(out_len(785, 1, 2, Padding::Same).unwrap(), 393);
        assert!(matches!(
            out_len(24, 25, 1, Padding::Valid),
            Err(CostError::KernelTooLarge { kernel: 25, len: 24 })
        ));
        // same padding never errors on kernel size
        assert_eq!(out_len(4, 25, 1, Padding::Same).unwrap(), 4);
    }

    #[test]
    fn param_count_decomposes_as_documented() {
        // conv 32 × (1×25 + 1) = 832, bn 4×32 = 128 -> block 960
        let g = genome(
            vec![block(32, 25, 1, Padding::Same, Pool::None)],
            HeadPool::GlobalAvg,
            0,
            11,
        );
        let classifier = (32 + 1) * 11;
        assert_eq!(count_params(&g, 784).unwrap(), 960 + classifier);

        // dense 64 -> 11 classes contributes (64+1) × 11 = 715
        let g = genome(
            vec![block(8, 3, 1, Padding::Same, Pool::None)],
            HeadPool::GlobalAvg,
            64,
            11,
        );
        let conv_bn = 8 * (1 * 3 + 1) + 4 * 8;
        let dense = (8 + 1) * 64;
        assert_eq!(count_params(&g, 784).unwrap(), (conv_bn + dense) as u64 + 715);
    }

    #[test]
    fn section_subtotals_sum_to_the_param_count() {
        let g = genome(
            vec![block(32, 25, 1, Padding::Same, Pool::None)],
            HeadPool::GlobalAvg,
            0,
            11,
        );
        let (per_block, head) = params_by_section(&g, 784).unwrap();
        assert_eq!(per_block, vec![960]);
        assert_eq!(head, (32 + 1) * 11);

        let g = genome(
            vec![
                block(8, 3, 1, Padding::Same, Pool::Max(2)),
                block(16, 5, 2, Padding::Valid, Pool::None),
            ],
            HeadPool::Flatten,
            64,
            4,
        );
        let (per_block, head) = params_by_section(&g, 784).unwrap();
        assert_eq!(per_block.len(), 2);
        assert_eq!(
            per_block.iter().sum::<u64>() + head,
            count_params(&g, 784).unwrap()
        );
    }

    #[test]
    fn flatten_head_uses_the_full_spatial_extent() {
        let g = genome(
            vec![block(8, 3, 1, Padding::Same, Pool::Max(2))],
            HeadPool::Flatten,
            0,
            4,
        );
        // 784 -> conv 784 -> pool 392; flatten = 8 × 392 = 3136 features
        let conv_bn = 8 * (1 * 3 + 1) + 32;
        assert_eq!(count_params(&g, 784).unwrap(), conv_bn as u64 + (3136 + 1) * 4);
    }

    #[test]
    fn flop_count_decomposes_as_documented() {
        let g = genome(
            vec![block(32, 25, 1, Padding::Same, Pool::None)],
            HeadPool::GlobalAvg,
            0,
            11,
        );
        let conv = 2 * 1 * 25 * 32 * 784; // 1,254,400
        assert_eq!(conv, 1_254_400);
        let bn = 2 * 32 * 784;
        let relu = 32 * 784; // activation ops = element count = 25,088
        assert_eq!(relu, 25_088);
        let gap = 784 * 32;
        let classifier = 2 * 32 * 11;
        assert_eq!(
            count_flops(&g, 784).unwrap(),
            (conv + bn + relu + gap + classifier) as u64
        );
    }

    #[test]
    fn pooling_and_dense_flops_are_counted() {
        let g = genome(
            vec![block(8, 3, 1, Padding::Same, Pool::Avg(2))],
            HeadPool::Flatten,
            32,
            4,
        );
        let conv = 2 * 1 * 3 * 8 * 784;
        let bn = 2 * 8 * 784;
        let relu = 8 * 784;
        let pool = 2 * 8 * 392; // pool_size × elements_out
        let feat = 8 * 392;
        let dense = 2 * feat * 32 + 32; // dense + its ReLU
        let classifier = 2 * 32 * 4;
        assert_eq!(
            count_flops(&g, 784).unwrap(),
            (conv + bn + relu + pool + dense + classifier) as u64
        );
    }

    #[test]
    fn max_tensor_tracks_the_largest_activation() {
        // 784×32 conv output dominates
        let g = genome(
            vec![block(32, 25, 1, Padding::Same, Pool::None)],
            HeadPool::GlobalAvg,
            0,
            11,
        );
        assert_eq!(max_tensor(&g, 784).unwrap(), 25_088);

        // single filter, stride 2: the 784-element input dominates 392×1
        let g = genome(
            vec![block(1, 3, 2, Padding::Same, Pool::None)],
            HeadPool::GlobalAvg,
            0,
            4,
        );
        assert_eq!(max_tensor(&g, 784).unwrap(), 784);

        // pre-pool conv output counts even though pooling shrinks it
        let g = genome(
            vec![block(32, 3, 1, Padding::Same, Pool::Max(2))],
            HeadPool::GlobalAvg,
            0,
            4,
        );
        assert_eq!(max_tensor(&g, 784).unwrap(), 25_088);
    }

    #[test]
    fn cost_report_derives_flash_and_ram() {
        let g = genome(
            vec![block(32, 25, 1, Padding::Same, Pool::None)],
            HeadPool::GlobalAvg,
            0,
            11,
        );
        let c = estimate_cost(&g, 784).unwrap();
        assert_eq!(c.flash_bytes, 4 * c.params);
        assert_eq!(c.ram_bytes, 4 * c.max_tensor);
        assert_eq!(c.ram_bytes, 100_352); // 25,088 elements -> 100.352 KB
        assert!((c.ram_kb() - 100.352).abs() < 1e-9);

        // the published proposal-scale tensor count maps to 80.496 KB
        let r = CostReport {
            params: 88_000,
            max_tensor: 20_124,
            flops: 10_100_000,
            flash_bytes: 4 * 88_000,
            ram_bytes: 4 * 20_124,
        };
        assert!((r.flash_mb() - 0.352).abs() < 1e-12);
        assert!((r.ram_kb() - 80.496).abs() < 1e-12);
    }

    #[test]
    fn constraint_checks_are_strict() {
        let report = CostReport {
            params: 100,
            max_tensor: 50,
            flops: 1000,
            flash_bytes: 400,
            ram_bytes: 200,
        };
        // boundary: equal is a violation
        let v = check_constraints(&report, &Thresholds { d_th: Some(100), ..Default::default() });
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].quantity, Quantity::Params);
        assert!(v[0].to_string().contains("params = 100"));

        assert!(check_constraints(&report, &Thresholds::default()).is_empty());

        let proposal = CostReport {
            params: 88_000,
            max_tensor: 20_124,
            flops: 10_100_000,
            flash_bytes: 352_000,
            ram_bytes: 80_496,
        };
        let t = Thresholds {
            d_th: Some(6_000_000),
            r_th: Some(25_088),
            flops_th: Some(40_000_000),
        };
        assert!(check_constraints(&proposal, &t).is_empty());

        // all three can fail at once
        let tight = Thresholds { d_th: Some(1), r_th: Some(1), flops_th: Some(1) };
        assert_eq!(check_constraints(&proposal, &tight).len(), 3);
    }

    #[test]
    fn threshold_validation_rejects_zero() {
        assert!(Thresholds { d_th: Some(0), ..Default::default() }.validate().is_err());
        assert!(Thresholds::default().validate().is_ok());
    }

    #[test]
    fn ratios_match_published_scale_checks() {
        let ours = CostReport {
            params: 88_000,
            max_tensor: 20_124,
            flops: 10_100_000,
            flash_bytes: 352_000,
            ram_bytes: 80_496,
        };
        let identical = efficiency_ratios(&ours, &ours).unwrap();
        assert_eq!(round2(identical.params), 1.00);
        assert_eq!(round2(identical.ram), 1.00);

        let lstm = CostReport {
            params: 19_748_000,
            max_tensor: 76_248,
            flops: 41_117_000,
            flash_bytes: 4 * 19_748_000,
            ram_bytes: 4 * 76_248,
        };
        let r = efficiency_ratios(&lstm, &ours).unwrap();
        assert!((r.params - 224.40).abs() <= 0.01);
        assert!((r.max_tensor - 3.79).abs() <= 0.01);
        assert!((r.flops - 4.07).abs() <= 0.01);

        let textcnn = CostReport {
            params: 223_000,
            max_tensor: 313_600,
            flops: 267_217_000,
            flash_bytes: 4 * 223_000,
            ram_bytes: 4 * 313_600,
        };
        let r = efficiency_ratios(&textcnn, &ours).unwrap();
        assert_eq!(round2(r.ram), 15.58);
        assert_eq!(round2(r.params), 2.53);

        let zero = CostReport {
            params: 0,
            max_tensor: 1,
            flops: 1,
            flash_bytes: 0,
            ram_bytes: 4,
        };
        assert!(matches!(
            efficiency_ratios(&ours, &zero),
            Err(CostError::DivByZero("params"))
        ));
    }

    #[test]
    fn costs_grow_monotonically_with_depth() {
        // prefixes of a fixed same-padding chain: deeper is never cheaper
        let chain: Vec<Block> = vec![
            block(8, 3, 1, Padding::Same, Pool::None),
            block(16, 5, 1, Padding::Same, Pool::Max(2)),
            block(24, 3, 1, Padding::Same, Pool::None),
            block(32, 7, 1, Padding::Same, Pool::Avg(2)),
            block(48, 3, 1, Padding::Same, Pool::None),
        ];
        let mut prev_params = 0u64;
        let mut prev_flops = 0u64;
        for k in 1..=chain.len() {
            let g = genome(chain[..k].to_vec(), HeadPool::GlobalAvg, 0, 4);
            let params = count_params(&g, 784).unwrap();
            let flops = count_flops(&g, 784).unwrap();
            assert!(params > prev_params);
            assert!(flops > prev_flops);
            prev_params = params;
            prev_flops = flops;
        }
    }
}
