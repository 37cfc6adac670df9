use crate::dist::ValueDistribution;
use crate::error::{Error, Result};
use crate::instance::Instance;

const EPS: f64 = 1e-10;
const MAX_PIVOTS: usize = 200_000;

/// Largest one-bidder type space handed to the LP.
pub const MAX_LP_TYPES: u64 = 64;

/// Maximizes `c.z` subject to `A z <= b`, `z >= 0`, for `b >= 0` (the origin is
/// feasible, so one phase suffices). Dense tableau with Bland's rule.
pub(crate) fn simplex_max(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<(f64, Vec<f64>)> {
    let rows = a.len();
    let nv = c.len();
    if b.len() != rows || a.iter().any(|r| r.len() != nv) {
        return Err(Error::InvalidArgument("LP dimensions disagree".into()));
    }
    if b.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidArgument("LP needs b >= 0".into()));
    }
    let width = nv + rows + 1;
    let mut tab = vec![vec![0.0; width]; rows + 1];
    for (r, row) in a.iter().enumerate() {
        tab[r][..nv].copy_from_slice(row);
        tab[r][nv + r] = 1.0;
        tab[r][width - 1] = b[r];
    }
    for (j, &cj) in c.iter().enumerate() {
        tab[rows][j] = -cj;
    }
    let mut basis: Vec<usize> = (nv..nv + rows).collect();
    for _ in 0..MAX_PIVOTS {
        let Some(enter) = (0..nv + rows).find(|&j| tab[rows][j] < -EPS) else {
            let mut z = vec![0.0; nv];
            for (r, &bv) in basis.iter().enumerate() {
                if bv < nv {
                    z[bv] = tab[r][width - 1];
                }
            }
            return Ok((tab[rows][width - 1], z));
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..rows {
            let coef = tab[r][enter];
            if coef > EPS {
                let ratio = tab[r][width - 1] / coef;
                let better = match leave {
                    None => true,
                    Some((l, best)) => ratio < best - EPS || (ratio <= best + EPS && basis[r] < basis[l]),
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((lr, _)) = leave else {
            return Err(Error::Unbounded);
        };
        let piv = tab[lr][enter];
        tab[lr].iter_mut().for_each(|x| *x /= piv);
        let pivot_row = tab[lr].clone();
        for (r, row) in tab.iter_mut().enumerate() {
            if r != lr {
                let f = row[enter];
                if f != 0.0 {
                    row.iter_mut().zip(&pivot_row).for_each(|(x, p)| *x -= f * p);
                }
            }
        }
        basis[lr] = enter;
    }
    Err(Error::TooLarge("simplex pivot limit reached".into()))
}

/// Optimal revenue for one additive bidder with independent discrete item
/// values, over all IC and IR lottery menus. Solves the LP in allocations
/// `x_t in [0,1]^m` and utilities `u_t >= 0`:
/// maximize `sum_t f_t (v_t . x_t - u_t)` subject to
/// `u_s - u_t + (v_t - v_s) . x_s <= 0` for all `t != s`.
pub fn brute_force_opt_small(items: &[ValueDistribution]) -> Result<f64> {
    let inst = Instance::new(vec![items.to_vec()])?;
    let count = inst
        .profile_count()
        .ok_or(Error::NeedsContinuous("brute_force_opt_small"))?;
    if count > MAX_LP_TYPES {
        return Err(Error::TooLarge(format!(
            "{count} types exceed the LP limit of {MAX_LP_TYPES}"
        )));
    }
    let m = items.len();
    let mut types: Vec<(Vec<f64>, f64)> = Vec::new();
    inst.for_each_profile(|t, p| {
        if p > 0.0 {
            types.push((t.to_vec(), p));
        }
    })?;
    let k = types.len();
    let nv = k * m + k;
    let xv = |t: usize, j: usize| t * m + j;
    let uv = |t: usize| k * m + t;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for t in 0..k {
        for j in 0..m {
            let mut row = vec![0.0; nv];
            row[xv(t, j)] = 1.0;
            a.push(row);
            b.push(1.0);
        }
    }
    for t in 0..k {
        for s in 0..k {
            if s == t {
                continue;
            }
            let mut row = vec![0.0; nv];
            row[uv(s)] += 1.0;
            row[uv(t)] -= 1.0;
            for j in 0..m {
                row[xv(s, j)] += types[t].0[j] - types[s].0[j];
            }
            a.push(row);
            b.push(0.0);
        }
    }
    let mut c = vec![0.0; nv];
    for (t, (v, f)) in types.iter().enumerate() {
        for j in 0..m {
            c[xv(t, j)] = f * v[j];
        }
        c[uv(t)] = -f;
    }
    Ok(simplex_max(&a, &b, &c)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Revenue of the best menu whose allocations lie on `levels`, pricing
    /// each allocation rule optimally by shortest paths over the IC graph.
    fn grid_menu_oracle(items: &[ValueDistribution], levels: &[f64]) -> f64 {
        let inst = Instance::new(vec![items.to_vec()]).unwrap();
        let mut types = Vec::new();
        inst.for_each_profile(|t, p| types.push((t.to_vec(), p))).unwrap();
        let (k, m) = (types.len(), items.len());
        let choices = levels.len().pow(m as u32);
        let mut best = 0.0f64;
        let mut assign = vec![0usize; k];
        loop {
            let alloc: Vec<Vec<f64>> = assign
                .iter()
                .map(|&c| {
                    let mut c = c;
                    (0..m)
                        .map(|_| {
                            let l = levels[c % levels.len()];
                            c /= levels.len();
                            l
                        })
                        .collect()
                })
                .collect();
            // Node k is the outside option; edge s -> t bounds p_t - p_s.
            let dot = |v: &[f64], x: &[f64]| v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            let mut dist = vec![f64::INFINITY; k + 1];
            dist[k] = 0.0;
            for _ in 0..=k {
                for t in 0..k {
                    let via_out = dot(&types[t].0, &alloc[t]);
                    dist[t] = dist[t].min(via_out);
                    for s in 0..k {
                        if s != t {
                            let w = dot(&types[t].0, &alloc[t]) - dot(&types[t].0, &alloc[s]);
                            dist[t] = dist[t].min(dist[s] + w);
                        }
                    }
                }
            }
            let feasible = (0..k).all(|t| {
                (0..k).all(|s| dist[t] <= dist[s] + dot(&types[t].0, &alloc[t]) - dot(&types[t].0, &alloc[s]) + 1e-9)
            });
            if feasible {
                let rev: f64 = (0..k).map(|t| types[t].1 * dist[t]).sum();
                best = best.max(rev);
            }
            let mut pos = 0;
            loop {
                if pos == k {
                    return best;
                }
                assign[pos] += 1;
                if assign[pos] < choices {
                    break;
                }
                assign[pos] = 0;
                pos += 1;
            }
        }
    }

    fn two_point() -> ValueDistribution {
        ValueDistribution::grid(vec![(1.0, 0.5), (2.0, 0.5)]).unwrap()
    }

    #[test]
    fn simplex_small_program() {
        // max 3x + 2y st x + y <= 4, x + 3y <= 6, x <= 3.
        let a = vec![vec![1.0, 1.0], vec![1.0, 3.0], vec![1.0, 0.0]];
        let (v, z) = simplex_max(&a, &[4.0, 6.0, 3.0], &[3.0, 2.0]).unwrap();
        assert!((v - 11.0).abs() < 1e-12);
        assert!((z[0] - 3.0).abs() < 1e-12 && (z[1] - 1.0).abs() < 1e-12);
        assert!(matches!(
            simplex_max(&[vec![-1.0]], &[1.0], &[1.0]),
            Err(Error::Unbounded)
        ));
    }

    #[test]
    fn single_item_posted_price() {
        let v = brute_force_opt_small(&[two_point()]).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
        assert!((grid_menu_oracle(&[two_point()], &[0.0, 0.5, 1.0]) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn point_masses_sell_the_bundle() {
        let p = ValueDistribution::point(1.0).unwrap();
        let v = brute_force_opt_small(&[p.clone(), p]).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
    }

    #[test]
    fn two_iid_items_beat_separate_sale() {
        let items = [two_point(), two_point()];
        let v = brute_force_opt_small(&items).unwrap();
        // Bundle price 3 sells with probability 3/4.
        assert!(v >= 2.25 - 1e-9);
        let grid = grid_menu_oracle(&items, &[0.0, 0.5, 1.0]);
        assert!(grid >= 2.25 - 1e-9);
        assert!(grid <= v + 1e-9);
    }

    #[test]
    fn lp_matches_grid_menus_on_three_point_item() {
        let d = ValueDistribution::grid(vec![(1.0, 0.3), (2.0, 0.3), (3.0, 0.4)]).unwrap();
        let v = brute_force_opt_small(std::slice::from_ref(&d)).unwrap();
        let grid = grid_menu_oracle(&[d], &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!((v - grid).abs() < 1e-9, "lp {v} grid {grid}");
    }

    #[test]
    fn refuses_large_or_continuous() {
        let u = ValueDistribution::uniform(0.0, 1.0).unwrap();
        assert!(brute_force_opt_small(&[u]).is_err());
        let big = ValueDistribution::grid((1..=9).map(|v| (v as f64, 1.0 / 9.0)).collect()).unwrap();
        assert!(matches!(
            brute_force_opt_small(&[big.clone(), big]),
            Err(Error::TooLarge(_))
        ));
    }
}
