fn sorted(x: &[f64], w: &[f64]) -> Vec<(f64, f64)> {
    let mut s: Vec<(f64, f64)> = x.iter().copied().zip(w.iter().copied()).filter(|(_, w)| *w > 0.0).collect();
    s.sort_by(|a, b| a.0.total_cmp(&b.0));
    s
}

/// `W_p^p` between two weighted 1D measures via the monotone (quantile) coupling.
pub fn wp_1d(xa: &[f64], wa: &[f64], xb: &[f64], wb: &[f64], p: i32) -> f64 {
    let a = sorted(xa, wa);
    let b = sorted(xb, wb);
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut total = 0.0;
    loop {
        let m = ra.min(rb);
        total += m * (a[i].0 - b[j].0).abs().powi(p);
        ra -= m;
        rb -= m;
        // the side that ran out advances; rounding leftovers go with the last atom
        if ra <= rb {
            i += 1;
            if i == a.len() {
                break;
            }
            ra += a[i].1;
        } else {
            j += 1;
            if j == b.len() {
                break;
            }
            rb += b[j].1;
        }
    }
    total
}

/// `W1` between two weighted 1D measures as `∫ |F_a − F_b| dx`.
pub fn w1_1d(xa: &[f64], wa: &[f64], xb: &[f64], wb: &[f64]) -> f64 {
    let mut ev: Vec<(f64, f64)> = sorted(xa, wa);
    ev.extend(sorted(xb, wb).into_iter().map(|(x, w)| (x, -w)));
    ev.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut diff = 0.0;
    let mut total = 0.0;
    for k in 0..ev.len() {
        diff += ev[k].1;
        if k + 1 < ev.len() {
            total += diff.abs() * (ev[k + 1].0 - ev[k].0);
        }
    }
    total
}
