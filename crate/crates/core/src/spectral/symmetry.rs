//! Averaging over the lattice symmetry group: all coordinate sign flips and
//! axis permutations (the hyperoctahedral group, `2^n n!` elements).
//!
//! On the grid `x_j = -L + j h` the reflection `x -> -x` maps index `j` to
//! `(N - j) mod N`, so the group acts by index permutations and the average
//! is a mean over orbits.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::{Field, Grid};

struct Orbits {
    offsets: Vec<usize>,
    members: Vec<u32>,
}

fn permutations(dim: usize) -> Vec<Vec<usize>> {
    match dim {
        1 => vec![vec![0]],
        2 => vec![vec![0, 1], vec![1, 0]],
        _ => vec![
            vec![0, 1, 2],
            vec![0, 2, 1],
            vec![1, 0, 2],
            vec![1, 2, 0],
            vec![2, 0, 1],
            vec![2, 1, 0],
        ],
    }
}

fn build_orbits(grid: &Grid) -> Orbits {
    let dim = grid.dim();
    let n = grid.points();
    let perms = permutations(dim);
    let mut visited = vec![false; grid.len()];
    let mut offsets = vec![0];
    let mut members = Vec::with_capacity(grid.len());
    let mut images = Vec::with_capacity(48);
    for idx in 0..grid.len() {
        if visited[idx] {
            continue;
        }
        let multi = grid.multi_index(idx);
        images.clear();
        for perm in &perms {
            for signs in 0..(1usize << dim) {
                let mut image = [0usize; 3];
                for axis in 0..dim {
                    let i = multi[perm[axis]];
                    image[axis] = if signs >> axis & 1 == 1 { (n - i) % n } else { i };
                }
                images.push(grid.flat_index(&image));
            }
        }
        images.sort_unstable();
        images.dedup();
        for &m in &images {
            visited[m] = true;
            members.push(m as u32);
        }
        offsets.push(members.len());
    }
    Orbits { offsets, members }
}

fn orbits_for(grid: &Grid) -> Arc<Orbits> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Orbits>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (grid.dim(), grid.points());
    if let Some(found) = cache.lock().expect("orbit cache poisoned").get(&key) {
        return found.clone();
    }
    let built = Arc::new(build_orbits(grid));
    cache.lock().expect("orbit cache poisoned").entry(key).or_insert(built).clone()
}

/// In-place group average of a raw sample array laid out on `grid`.
pub(crate) fn symmetrize_in_place(grid: &Grid, values: &mut [f64]) {
    let orbits = orbits_for(grid);
    for window in orbits.offsets.windows(2) {
        let members = &orbits.members[window[0]..window[1]];
        if members.len() == 1 {
            continue;
        }
        let mean = members.iter().map(|&m| values[m as usize]).sum::<f64>() / members.len() as f64;
        for &m in members {
            values[m as usize] = mean;
        }
    }
}

/// Projection onto fields invariant under the lattice symmetry group.
pub fn symmetrize_radial(f: &Field) -> Field {
    let mut out = f.clone();
    symmetrize_in_place(f.grid(), out.values_mut());
    out
}

/// `‖f - symmetrize_radial(f)‖_∞`.
pub fn radial_defect(f: &Field) -> f64 {
    symmetrize_radial(f).sub(f).max_abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn odd_function_is_annihilated() {
        let g = Grid::new(2, 32, 8.0).unwrap();
        let f = Field::from_fn(g, |x| x[0] * (-(x[0] * x[0] + x[1] * x[1])).exp());
        assert!(symmetrize_radial(&f).max_abs() < 1e-15);
    }

    #[test]
    fn symmetric_field_unchanged_and_projection() {
        let g = Grid::new(3, 16, 4.0).unwrap();
        let f = Field::from_fn(g, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
        assert!(symmetrize_radial(&f).sub(&f).max_abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = Field::new(g, (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let once = symmetrize_radial(&r);
        let twice = symmetrize_radial(&once);
        assert!(twice.sub(&once).max_abs() < 1e-15);
    }

    #[test]
    fn orbit_sizes_cover_group() {
        // the generic orbit of the 2-D group has 8 points; the centre is fixed
        let g = Grid::new(2, 16, 1.0).unwrap();
        let orbits = build_orbits(&g);
        let largest = orbits.offsets.windows(2).map(|w| w[1] - w[0]).max().unwrap();
        assert_eq!(largest, 8);
        assert_eq!(*orbits.offsets.last().unwrap(), g.len());
    }
}
