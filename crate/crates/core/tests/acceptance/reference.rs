//! Published reference grids the model is checked against.

pub const MODELS: [&str; 3] = ["llama3-70b", "llama3-405b", "deepseekv3"];
pub const TPS: [u64; 3] = [8, 32, 128];

/// Contexts of the capacity/intensity grid: 1K..128K.
pub const CAP_CONTEXTS: [u64; 8] = [
    1 << 10,
    2 << 10,
    4 << 10,
    8 << 10,
    16 << 10,
    32 << 10,
    64 << 10,
    128 << 10,
];

/// GiB per row; columns are (70B B=1, 70B B=32, 405B B=1, 405B B=32, DS B=1, DS B=32).
pub const CAPACITY: [[f64; 6]; 8] = [
    [65.0, 70.0, 377.0, 385.0, 625.0, 626.0],
    [66.0, 75.0, 378.0, 393.0, 625.0, 627.0],
    [66.0, 85.0, 378.0, 409.0, 625.0, 629.0],
    [66.0, 105.0, 379.0, 440.0, 625.0, 634.0],
    [68.0, 145.0, 381.0, 503.0, 625.0, 642.0],
    [70.0, 225.0, 385.0, 629.0, 626.0, 659.0],
    [75.0, 385.0, 393.0, 881.0, 627.0, 694.0],
    [85.0, 705.0, 409.0, 1385.0, 629.0, 762.0],
];

/// FLOPs per byte, same layout as [`CAPACITY`].
pub const AMI: [[f64; 6]; 8] = [
    [1.99, 59.26, 2.00, 62.83, 1.37, 7.74],
    [2.02, 56.38, 2.02, 62.21, 1.39, 8.51],
    [2.09, 51.64, 2.06, 61.04, 1.44, 10.05],
    [2.22, 44.87, 2.14, 58.97, 1.54, 13.09],
    [2.47, 36.92, 2.29, 55.59, 1.73, 19.06],
    [2.96, 29.49, 2.60, 50.87, 2.12, 30.59],
    [3.82, 23.88, 3.19, 45.47, 2.90, 52.10],
    [5.25, 20.31, 4.30, 40.57, 4.46, 89.83],
];

pub const SWEEP_CONTEXTS: [u64; 6] = [4 << 10, 8 << 10, 16 << 10, 32 << 10, 64 << 10, 128 << 10];

/// Single-user TPS at batch 1, `[model][tp][context]` for HBM3 systems.
pub const T3_UTPS: [[[f64; 6]; 3]; 3] = [
    [
        [486.0, 482.0, 473.0, 457.0, 427.0, 378.0],
        [1200.0, 1200.0, 1100.0, 1100.0, 1100.0, 990.0],
        [2100.0, 2100.0, 2000.0, 2000.0, 2000.0, 1900.0],
    ],
    [
        [86.0, 86.0, 85.0, 85.0, 83.0, 80.0],
        [290.0, 289.0, 288.0, 285.0, 281.0, 271.0],
        [776.0, 775.0, 773.0, 768.0, 760.0, 743.0],
    ],
    [
        [52.0, 52.0, 52.0, 52.0, 52.0, 52.0],
        [196.0, 196.0, 196.0, 196.0, 196.0, 195.0],
        [661.0, 661.0, 661.0, 660.0, 659.0, 657.0],
    ],
];

/// Printed `stps (utps)` cells of the max-batch grid for HBM3 systems,
/// `[model][tp][context]`. They repeat the batch-1 values.
pub const T4_PAIRS: [[[(f64, f64); 6]; 3]; 3] = {
    let mut out = [[[(0.0, 0.0); 6]; 3]; 3];
    let mut m = 0;
    while m < 3 {
        let mut t = 0;
        while t < 3 {
            let mut c = 0;
            while c < 6 {
                let v = T3_UTPS[m][t][c];
                out[m][t][c] = (v, v);
                c += 1;
            }
            t += 1;
        }
        m += 1;
    }
    out
};

pub const T2_CONTEXTS: [u64; 2] = [4 << 10, 128 << 10];

/// Max-batch `stps (utps)` at 4K and 128K, `[model][tp][context]`.
pub const T2_PAIRS: [[[(f64, f64); 2]; 3]; 3] = [
    [
        [(48_000.0, 43.0), (1_500.0, 43.0)],
        [(202_000.0, 42.0), (6_300.0, 42.0)],
        [(822_000.0, 42.0), (26_000.0, 42.0)],
    ],
    [
        [(17_000.0, 43.0), (519.0, 43.0)],
        [(84_000.0, 31.0), (3_600.0, 42.0)],
        [(337_000.0, 28.0), (16_000.0, 42.0)],
    ],
    [
        [(44_000.0, 41.0), (1_400.0, 42.0)],
        [(363_000.0, 20.0), (24_000.0, 42.0)],
        [(1_500_000.0, 17.0), (112_000.0, 41.0)],
    ],
];

/// User TPS of Llama3-70B on 128 HBM3 chips at 4K, batch 1 and the
/// largest plotted batch, and the efficiency gain between them.
pub const CURVE_UTPS_B1: f64 = 2059.0;
pub const CURVE_UTPS_BMAX: f64 = 1913.0;
pub const CURVE_GAIN: f64 = 30.0;

/// Imbalance of 64 tokens over 256 experts with 8 active.
pub const MI_64: f64 = 3.0;
