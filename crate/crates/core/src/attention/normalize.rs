use crate::plane::Plane;

/// Interior points strictly greater than all 8 neighbours.
pub fn local_maxima(m: &Plane) -> Vec<(usize, usize, f32)> {
    let (w, h) = m.dims();
    let mut out = Vec::new();
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let v = m.at(x, y);
            let is_max = (-1i64..=1).all(|dy| {
                (-1i64..=1).all(|dx| (dx, dy) == (0, 0) || v > m.at((x as i64 + dx) as usize, (y as i64 + dy) as usize))
            });
            if is_max {
                out.push((x, y, v));
            }
        }
    }
    out
}

/// The N(.) operator: rescale to [0,1], then weight by (1 - mean of the
/// other local maxima)^2. Promotes maps with one dominant peak.
pub fn normalize_map(m: &Plane) -> Plane {
    let mut r = m.rescaled_unit();
    if r.data.iter().all(|&v| v == 0.0) {
        return r;
    }
    let mut vals: Vec<f32> = local_maxima(&r).into_iter().map(|(_, _, v)| v).collect();
    if let Some(i) = vals.iter().position(|&v| v == 1.0) {
        vals.swap_remove(i);
    }
    let mbar = if vals.is_empty() {
        0.0
    } else {
        (vals.iter().map(|&v| v as f64).sum::<f64>() / vals.len() as f64) as f32
    };
    r.scale((1.0 - mbar).powi(2));
    r
}
