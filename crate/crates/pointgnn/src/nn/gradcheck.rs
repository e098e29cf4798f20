use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Compare an analytic gradient against central finite differences on
/// `probes` randomly chosen coordinates of `x`. Returns the max error,
/// relative for large entries and absolute for small ones:
/// |a - n| / max(|a|, |n|, 1).
///
/// `f` must be a pure scalar function of the full coordinate vector.
pub fn grad_check(
    f: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    probes: usize,
    h: f64,
    seed: u64,
) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = x.to_vec();
    let mut max_err: f64 = 0.0;
    let n = x.len();
    for _ in 0..probes.min(n) {
        let k = if probes >= n {
            // exhaustive sweep would re-probe; still fine to sample
            rng.random_range(0..n)
        } else {
            rng.random_range(0..n)
        };
        let orig = work[k];
        work[k] = orig + h;
        let fp = f(&work);
        work[k] = orig - h;
        let fm = f(&work);
        work[k] = orig;
        let numeric = (fp - fm) / (2.0 * h);
        let err = (analytic[k] - numeric).abs()
            / analytic[k].abs().max(numeric.abs()).max(1.0);
        max_err = max_err.max(err);
    }
    max_err
}
