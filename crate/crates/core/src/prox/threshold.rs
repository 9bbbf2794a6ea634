/// Boxed soft-thresholding: zero inside `[-gamma, gamma]`, shrink by `gamma` outside.
#[inline]
pub fn boxed_soft_threshold(v: f64, gamma: f64) -> f64 {
    let a = v.abs();
    if a <= gamma {
        0.0
    } else {
        (a - gamma).copysign(v)
    }
}

/// Sum of magnitudes in index order. Feasibility checks use this exact order.
#[inline]
pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |s, x| s + x.abs())
}

/// Euclidean projection onto the unit l1 ball.
pub fn project_l1_ball(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    project_l1_ball_in_place(&mut out);
    out
}

/// Sort-based projection onto `{x : ||x||_1 <= 1}`.
///
/// The output always satisfies `l1_norm(x) <= 1` in floating point.
pub fn project_l1_ball_in_place(v: &mut [f64]) {
    if l1_norm(v) <= 1.0 {
        return;
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        cum += m;
        let t = (cum - 1.0) / (k + 1) as f64;
        if m > t {
            tau = t;
        } else {
            break;
        }
    }
    shrink(v, tau);
    // rounding can leave the sum a few ulps above one
    let mut guard = 0;
    loop {
        let s = l1_norm(v);
        if s <= 1.0 {
            break;
        }
        let active = v.iter().filter(|x| **x != 0.0).count().max(1);
        let bump = ((s - 1.0) / active as f64).max(f64::EPSILON * s);
        shrink(v, bump);
        guard += 1;
        if guard > 64 {
            let scale = 1.0 / s - f64::EPSILON;
            v.iter_mut().for_each(|x| *x *= scale);
        }
    }
}

fn shrink(v: &mut [f64], tau: f64) {
    for x in v.iter_mut() {
        *x = boxed_soft_threshold(*x, tau);
    }
}
