//! Build a small computation graph, run reverse-mode backward, and
//! check one gradient against central finite differences.

use sincvae::tensor::{Graph, Pad, Real, Tensor};

fn input() -> sincvae::Result<Tensor> {
    Tensor::new(
        vec![1, 1, 8],
        (0..8).map(|i| (i as Real) * 0.25 - 1.0).collect(),
    )
}

/// mean(tanh(conv1d(x, w))^2) for a given 3-tap kernel.
fn loss_at(w_data: &[Real]) -> sincvae::Result<f64> {
    let mut g = Graph::new();
    let x = g.constant(input()?);
    let w = g.leaf(Tensor::new(vec![1, 1, 3], w_data.to_vec())?);
    let y = g.conv1d(x, w, None, 1, Pad::Same)?;
    let t = g.tanh(y);
    let sq = g.square(t);
    let loss = g.mean_all(sq);
    Ok(g.value(loss).item() as f64)
}

fn main() -> sincvae::Result<()> {
    let mut g = Graph::new();
    let x = g.constant(input()?);
    let w_data: Vec<Real> = vec![0.4, -0.3, 0.2];
    let w = g.leaf(Tensor::new(vec![1, 1, 3], w_data.clone())?);
    let y = g.conv1d(x, w, None, 1, Pad::Same)?;
    let t = g.tanh(y);
    let sq = g.square(t);
    let loss = g.mean_all(sq);
    g.backward(loss)?;

    println!("loss = {:.6}", g.value(loss).item());
    let grad = g.grad(w).expect("w is a leaf, so it has a gradient");
    println!("dloss/dw = {:?}", grad.data());

    // finite-difference probe of the middle tap
    let h = 1e-4;
    let mut plus = w_data.clone();
    plus[1] += h as Real;
    let mut minus = w_data;
    minus[1] -= h as Real;
    let numeric = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * h);
    let analytic = grad.data()[1] as f64;
    println!("w[1]: analytic {analytic:.8}, finite-difference {numeric:.8}");
    assert!((analytic - numeric).abs() < 1e-6);
    println!("gradient check passed");
    Ok(())
}
