/// In-place unnormalized Walsh-Hadamard transform:
/// `v[s] <- Σ_a v[a] (-1)^popcount(a & s)`. The length must be a power of two.
pub fn walsh_hadamard(v: &mut [f64]) {
    let n = v.len();
    assert!(n.is_power_of_two(), "Walsh-Hadamard length must be a power of two");
    let mut h = 1;
    while h < n {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (a, b) = (*x, *y);
                *x = a + b;
                *y = a - b;
            }
        }
        h *= 2;
    }
}
