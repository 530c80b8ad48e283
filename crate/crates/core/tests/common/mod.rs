//! Helpers shared by the integration tests.
#![allow(dead_code)]

use pwolff::km::{cutoff_space, g_weight, intrinsic_half_width, time_peak, time_weight, KmContext};
use pwolff::solver::GridField;
use pwolff::{Domain, Params};

/// Direct summation over every cell and every level, in index order.
pub fn brute_force_a(ctx: &KmContext<'_>, j: usize, l_j: f64, l: f64) -> f64 {
    let f = ctx.field;
    let p = ctx.params.p;
    let k = ctx.params.k_cutoff;
    let lambda = ctx.params.lambda;
    let n = f.grid.n as i32;
    let rho_j = ctx.rho * 0.5f64.powi(j as i32);
    let gap = l - l_j;
    let tau = intrinsic_half_width(rho_j, gap, p);
    let s = f.time(ctx.s_level);
    let hn = f.grid.cell_volume();
    let dt = f.dt();
    let mut integral = 0.0;
    let mut sup: f64 = 0.0;
    for lvl in 0..f.num_levels() {
        let offset = f.time(lvl) - s;
        let peak = time_peak(offset, dt, tau);
        if peak == 0.0 {
            continue;
        }
        let weight = time_weight(offset, dt, tau, k - p);
        let mut slice_int = 0.0;
        let mut slice_g = 0.0;
        for c in 0..f.grid.num_cells() {
            let d = f.grid.center(c).dist(&ctx.y);
            if !(d < rho_j) {
                continue;
            }
            let u = f.levels[lvl][c];
            if u - l_j <= 0.0 {
                continue;
            }
            let xs = cutoff_space(d, rho_j);
            let ratio = (u - l_j) / gap;
            slice_int += ratio.powf((1.0 + lambda) * (p - 1.0)) * xs.powf(k - p);
            slice_g += g_weight(ratio, lambda).unwrap() * (xs * peak).powf(k);
        }
        integral += slice_int * hn * weight;
        sup = sup.max(slice_g * hn);
    }
    gap.powf(p - 2.0) / rho_j.powi(n) / rho_j.powf(p) * integral + sup / rho_j.powi(n)
}

pub fn small_field(n: usize, values: &[f64]) -> GridField {
    // 12 cells in 1D or 3 x 3 in 2D, 4 levels
    let cells = if n == 1 { 12 } else { 3 };
    let d = Domain::new(1.0, cells, 0.3, 0.1);
    let grid = d.grid(n);
    let m = grid.num_cells();
    let levels = (0..4).map(|k| values[k * m..(k + 1) * m].to_vec()).collect();
    GridField {
        domain: d,
        grid,
        levels,
        reports: Vec::new(),
    }
}

pub fn small_params(n: usize, p: f64, lambda_frac: f64, k_extra: f64) -> Params {
    let mut params = Params::model(n, p);
    params.lambda = lambda_frac / n as f64;
    params.k_cutoff = p + k_extra;
    params
}
