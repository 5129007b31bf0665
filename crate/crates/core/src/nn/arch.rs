use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PoolKind {
    Max,
    Average,
}

impl PoolKind {
    pub fn name(self) -> &'static str {
        match self {
            PoolKind::Max => "max",
            PoolKind::Average => "avg",
        }
    }
}

impl std::str::FromStr for PoolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "max" => Ok(PoolKind::Max),
            "avg" | "average" | "mean" => Ok(PoolKind::Average),
            other => Err(Error::InvalidArgument(format!("unknown pooling `{other}`"))),
        }
    }
}

/// Channels × height × width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Shape { channels, height, width }
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolSpec {
    pub kind: PoolKind,
    pub window: usize,
    pub stride: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvBlockSpec {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub pool: PoolSpec,
}

pub const CONV_BLOCKS: usize = 3;
pub const FC_LAYERS: usize = 2;
pub const OUTPUTS: usize = 2;

/// Three conv-ReLU-pool blocks followed by two fully connected layers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArchitectureSpec {
    pub input: Shape,
    pub blocks: Vec<ConvBlockSpec>,
    /// Widths of the fully connected layers; the last one is the output.
    pub fc_widths: Vec<usize>,
}

/// Resolved shapes of one conv block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockShapes {
    pub input: Shape,
    pub conv: Shape,
    pub pooled: Shape,
}

impl ArchitectureSpec {
    /// 32×32×3 input, 5×5 convolutions with 16/32/64 filters, 2×2 pooling,
    /// a 128-unit hidden layer and 2 outputs.
    pub fn standard(pool: PoolKind) -> Self {
        Self::with_widths(Shape::new(3, 32, 32), [16, 32, 64], 128, pool)
    }

    /// Same layout as [`standard`](Self::standard) with custom widths.
    pub fn with_widths(input: Shape, filters: [usize; 3], hidden: usize, pool: PoolKind) -> Self {
        let blocks = filters
            .iter()
            .map(|&f| ConvBlockSpec {
                filters: f,
                kernel: 5,
                stride: 1,
                padding: 2,
                pool: PoolSpec { kind: pool, window: 2, stride: 2 },
            })
            .collect();
        ArchitectureSpec { input, blocks, fc_widths: vec![hidden, OUTPUTS] }
    }

    pub fn set_pooling(&mut self, kind: PoolKind) {
        for b in &mut self.blocks {
            b.pool.kind = kind;
        }
    }

    pub fn pooling(&self) -> PoolKind {
        self.blocks.first().map_or(PoolKind::Max, |b| b.pool.kind)
    }

    /// Checks shape closure and returns the per-block shapes.
    pub fn block_shapes(&self) -> Result<Vec<BlockShapes>> {
        if self.blocks.len() != CONV_BLOCKS {
            return Err(Error::Architecture(format!(
                "expected {CONV_BLOCKS} conv blocks, found {}",
                self.blocks.len()
            )));
        }
        if self.fc_widths.len() != FC_LAYERS {
            return Err(Error::Architecture(format!(
                "expected {FC_LAYERS} fully connected layers, found {}",
                self.fc_widths.len()
            )));
        }
        if self.fc_widths[1] != OUTPUTS {
            return Err(Error::Architecture(format!("output width must be {OUTPUTS}")));
        }
        if self.fc_widths[0] == 0 {
            return Err(Error::Architecture("hidden layer width is zero".into()));
        }
        if self.input.is_empty() {
            return Err(Error::Architecture("empty input shape".into()));
        }
        let mut shape = self.input;
        let mut out = Vec::with_capacity(CONV_BLOCKS);
        for (i, b) in self.blocks.iter().enumerate() {
            let name = format!("conv{}", i + 1);
            if b.filters == 0 || b.kernel == 0 || b.stride == 0 {
                return Err(Error::shape(name, "zero filters, kernel or stride"));
            }
            let conv = Shape::new(
                b.filters,
                conv_extent(shape.height, b.kernel, b.stride, b.padding).ok_or_else(|| {
                    Error::shape(&name, format!("kernel {} does not fit height {}", b.kernel, shape.height))
                })?,
                conv_extent(shape.width, b.kernel, b.stride, b.padding).ok_or_else(|| {
                    Error::shape(&name, format!("kernel {} does not fit width {}", b.kernel, shape.width))
                })?,
            );
            let pname = format!("pool{}", i + 1);
            let p = b.pool;
            if p.window == 0 || p.stride == 0 {
                return Err(Error::shape(pname, "zero pooling window or stride"));
            }
            let pooled = Shape::new(
                conv.channels,
                conv_extent(conv.height, p.window, p.stride, 0)
                    .ok_or_else(|| Error::shape(&pname, "window larger than input"))?,
                conv_extent(conv.width, p.window, p.stride, 0)
                    .ok_or_else(|| Error::shape(&pname, "window larger than input"))?,
            );
            out.push(BlockShapes { input: shape, conv, pooled });
            shape = pooled;
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.block_shapes().map(|_| ())
    }

    /// Length of the flattened feature vector entering the first FC layer.
    pub fn flat_len(&self) -> Result<usize> {
        Ok(self.block_shapes()?[CONV_BLOCKS - 1].pooled.len())
    }
}

fn conv_extent(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_shapes_close() {
        let arch = ArchitectureSpec::standard(PoolKind::Max);
        let shapes = arch.block_shapes().unwrap();
        assert_eq!(shapes[0].conv, Shape::new(16, 32, 32));
        assert_eq!(shapes[0].pooled, Shape::new(16, 16, 16));
        assert_eq!(shapes[1].pooled, Shape::new(32, 8, 8));
        assert_eq!(shapes[2].pooled, Shape::new(64, 4, 4));
        assert_eq!(arch.flat_len().unwrap(), 1024);
        for w in shapes.windows(2) {
            assert_eq!(w[0].pooled, w[1].input);
        }
    }

    #[test]
    fn rejects_wrong_block_count() {
        let mut arch = ArchitectureSpec::standard(PoolKind::Max);
        arch.blocks.pop();
        assert!(matches!(arch.validate(), Err(Error::Architecture(_))));
        let mut arch = ArchitectureSpec::standard(PoolKind::Max);
        arch.fc_widths = vec![128, 3];
        assert!(arch.validate().is_err());
    }

    #[test]
    fn names_offending_layer() {
        let mut arch = ArchitectureSpec::standard(PoolKind::Max);
        arch.blocks[2].kernel = 40;
        arch.blocks[2].padding = 0;
        match arch.validate() {
            Err(Error::Shape { layer, .. }) => assert_eq!(layer, "conv3"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
