//! Decoupled weight decay on toy objectives.

use gaanet::optim::{adam_step, adamw_step, decay, minimize, AdamWConfig, OptimState};

fn main() -> anyhow::Result<()> {
    let cfg = AdamWConfig::default().with_lr(0.01);
    let (x, state) = minimize(&[0.0], 2000, cfg, |x| vec![2.0 * (x[0] - 3.0)])?;
    println!("(x - 3)² from 0: x = {:.6} after {} steps", x[0], state.t);

    // a zero gradient leaves only the shrink
    let cfg = AdamWConfig::default().with_weight_decay(0.05);
    let mut p = vec![2.0, -4.0];
    let mut s = OptimState::new(2, cfg);
    adamw_step(&mut p, &[0.0, 0.0], &mut s)?;
    println!("zero-gradient step: {p:?} (factor {})", 1.0 - cfg.lr * cfg.weight_decay);

    // same update as an Adam step after an explicit decay
    let grads = [0.3, -1.2];
    let (mut a, mut b) = (vec![0.5, 0.7], vec![0.5, 0.7]);
    let (mut sa, mut sb) = (OptimState::new(2, cfg), OptimState::new(2, cfg));
    adamw_step(&mut a, &grads, &mut sa)?;
    decay(&mut b, cfg.lr, cfg.weight_decay);
    adam_step(&mut b, &grads, &mut sb)?;
    println!("adamw {a:?} == decay + adam {b:?}: {}", a == b);

    // decay pulls the optimum of (x - 3)² towards zero
    for wd in [0.0, 0.1, 1.0] {
        let cfg = AdamWConfig::default().with_lr(0.01).with_weight_decay(wd);
        let (x, _) = minimize(&[0.0], 5000, cfg, |x| vec![2.0 * (x[0] - 3.0)])?;
        println!("λ = {wd:<4} -> x = {:.4}", x[0]);
    }
    Ok(())
}
