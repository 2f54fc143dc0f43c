//! Hand-prepared layer-by-layer count of tinyFQnet at 64x64.
//!
//! Each row is written out from Table 1 with pencil arithmetic: conv weights
//! are out * in/groups * k * k, BN contributes gamma and beta (plus two
//! running statistics as buffers), MACs are output pixels times weights per
//! output pixel. Nothing here calls into the library.

pub struct SheetRow {
    pub stage: &'static str,
    pub params: usize,
    pub buffers: usize,
    pub macs: u64,
    pub output: &'static [usize],
}

pub const SHEET: &[SheetRow] = &[
    // 3x3 conv 3 -> 11, stride 2, 32x32 out.
    SheetRow {
        stage: "stem",
        params: 3 * 11 * 9 + 2 * 11,
        buffers: 2 * 11,
        macs: 32 * 32 * (3 * 11 * 9),
        output: &[11, 32, 32],
    },
    // 11 -> 8 -> 2 at 32x32, depthwise 3x3 on 8 channels.
    SheetRow {
        stage: "block1",
        params: 11 * 8 + 8 * 9 + 8 * 2 + 2 * (8 + 8 + 2),
        buffers: 2 * (8 + 8 + 2),
        macs: 32 * 32 * (11 * 8) + 32 * 32 * (8 * 9) + 32 * 32 * (8 * 2),
        output: &[2, 32, 32],
    },
    // 2 -> 8 at 32x32, depthwise stride 2 to 16x16, 8 -> 5.
    SheetRow {
        stage: "block2",
        params: 2 * 8 + 8 * 9 + 8 * 5 + 2 * (8 + 8 + 5),
        buffers: 2 * (8 + 8 + 5),
        macs: 32 * 32 * (2 * 8) + 16 * 16 * (8 * 9) + 16 * 16 * (8 * 5),
        output: &[5, 16, 16],
    },
    SheetRow {
        stage: "block3",
        params: 5 * 20 + 20 * 9 + 20 * 5 + 2 * (20 + 20 + 5),
        buffers: 2 * (20 + 20 + 5),
        macs: 16 * 16 * (5 * 20) + 16 * 16 * (20 * 9) + 16 * 16 * (20 * 5),
        output: &[5, 16, 16],
    },
    // 5 -> 20 at 16x16, depthwise stride 2 to 8x8, 20 -> 11.
    SheetRow {
        stage: "block4",
        params: 5 * 20 + 20 * 9 + 20 * 11 + 2 * (20 + 20 + 11),
        buffers: 2 * (20 + 20 + 11),
        macs: 16 * 16 * (5 * 20) + 8 * 8 * (20 * 9) + 8 * 8 * (20 * 11),
        output: &[11, 8, 8],
    },
    SheetRow {
        stage: "block5",
        params: 11 * 44 + 44 * 9 + 44 * 11 + 2 * (44 + 44 + 11),
        buffers: 2 * (44 + 44 + 11),
        macs: 8 * 8 * (11 * 44 + 44 * 9 + 44 * 11),
        output: &[11, 8, 8],
    },
    SheetRow {
        stage: "block6",
        params: 11 * 44 + 44 * 9 + 44 * 11 + 2 * (44 + 44 + 11),
        buffers: 2 * (44 + 44 + 11),
        macs: 8 * 8 * (11 * 44 + 44 * 9 + 44 * 11),
        output: &[11, 8, 8],
    },
    SheetRow {
        stage: "block7",
        params: 11 * 44 + 44 * 9 + 44 * 22 + 2 * (44 + 44 + 22),
        buffers: 2 * (44 + 44 + 22),
        macs: 8 * 8 * (11 * 44 + 44 * 9 + 44 * 22),
        output: &[22, 8, 8],
    },
    // 1x1 conv 22 -> 256.
    SheetRow {
        stage: "head",
        params: 22 * 256 + 2 * 256,
        buffers: 2 * 256,
        macs: 8 * 8 * (22 * 256),
        output: &[256, 8, 8],
    },
    SheetRow {
        stage: "avgpool",
        params: 0,
        buffers: 0,
        macs: 0,
        output: &[256],
    },
    // Linear 256 -> 1 with bias.
    SheetRow {
        stage: "fc",
        params: 256 + 1,
        buffers: 0,
        macs: 256,
        output: &[1],
    },
];

/// Column totals, summed by hand from the rows above.
pub const TOTAL_PARAMS: usize = 13_366;
pub const TOTAL_BUFFERS: usize = 1_420;
pub const TOTAL_MACS: u64 = 1_331_456;

/// Table 1's output-size column for a 64x64 input.
pub const TABLE1_SHAPES: &[&[usize]] = &[
    &[11, 32, 32],
    &[2, 32, 32],
    &[5, 16, 16],
    &[5, 16, 16],
    &[11, 8, 8],
    &[11, 8, 8],
    &[11, 8, 8],
    &[22, 8, 8],
    &[256, 8, 8],
    &[256],
    &[1],
];
