//! Builds a small noiseless received tensor, unfolds it three ways and checks
//! each unfolding against its Khatri-Rao model.

use ris_joint::linalg::{khatri_rao, max_abs_diff, sample_complex_gaussian, RngStream};
use ris_joint::parafac::{model_y1, model_y2, model_y3, unfold_tensor};
use ris_joint::scene::{noiseless_tensor, PhaseSchedule};

fn main() -> ris_joint::Result<()> {
    let (k, n, t, p) = (3, 4, 5, 4);
    let mut rng = RngStream::new(7, 0);
    let hr = sample_complex_gaussian(k, n, 1.0, &mut rng)?;
    let he = sample_complex_gaussian(n, t, 1.0, &mut rng)?;
    let ps = PhaseSchedule::dft(p, n)?;

    let y = noiseless_tensor(&hr, &he, &ps)?;
    let views = unfold_tensor(&y);
    println!("tensor dims (K, T, P) = {:?}", y.dims());
    println!("Y1 {:?}  Y2 {:?}  Y3 {:?}", views.y1.shape(), views.y2.shape(), views.y3.shape());

    println!("|Y1 - (He^T kr Phi) Hr^T|max = {:.2e}", max_abs_diff(&views.y1, &model_y1(&hr, &he, &ps)?));
    println!("|Y2 - (Phi kr Hr) He|max     = {:.2e}", max_abs_diff(&views.y2, &model_y2(&hr, &he, &ps)?));
    println!("|Y3 - (Hr kr He^T) Phi^T|max = {:.2e}", max_abs_diff(&views.y3, &model_y3(&hr, &he, &ps)?));

    let kr = khatri_rao(&ps.phi, &hr)?;
    println!("Phi kr Hr is {:?}", kr.shape());
    println!("refold is exact: {}", views.refold() == y);
    Ok(())
}
