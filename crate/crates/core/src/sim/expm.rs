//! Exact zero-order-hold integration of one spring-damper axis.

type M3 = [[f64; 3]; 3];

fn mat_mul(a: &M3, b: &M3) -> M3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
fn expm(a: &M3) -> M3 {
    let norm = a.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let a: M3 = a.map(|r| r.map(|v| v * scale));
    let mut result = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut term = result;
    for n in 1..=14 {
        term = mat_mul(&term, &a);
        for (r, t) in result.iter_mut().zip(&term) {
            for (v, x) in r.iter_mut().zip(t) {
                *v += x / FACT[n];
            }
        }
    }
    for _ in 0..squarings {
        result = mat_mul(&result, &result);
    }
    result
}

const FACT: [f64; 15] = {
    let mut f = [1.0; 15];
    let mut i = 1;
    while i < 15 {
        f[i] = f[i - 1] * i as f64;
        i += 1;
    }
    f
};

/// Advances `m x'' = f + k (xs - x) - d x'` by `dt` with `xs` and `f` held.
pub(crate) fn spring_damper_step(x: f64, v: f64, xs: f64, k: f64, d: f64, m: f64, f: f64, dt: f64) -> (f64, f64) {
    let a = [[0.0, dt, 0.0], [-k / m * dt, -d / m * dt, f / m * dt], [0.0, 0.0, 0.0]];
    let e = expm(&a);
    let y = x - xs;
    let y1 = e[0][0] * y + e[0][1] * v + e[0][2];
    let v1 = e[1][0] * y + e[1][1] * v + e[1][2];
    (xs + y1, v1)
}
