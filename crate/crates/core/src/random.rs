use rand::Rng;
use rand_distr::StandardNormal;

pub fn standard_normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `l` points drawn uniformly from the square `[lo, hi]²`.
pub fn uniform_points<R: Rng + ?Sized>(rng: &mut R, l: usize, lo: f64, hi: f64) -> Vec<[f64; 2]> {
    (0..l)
        .map(|_| [rng.random_range(lo..=hi), rng.random_range(lo..=hi)])
        .collect()
}
