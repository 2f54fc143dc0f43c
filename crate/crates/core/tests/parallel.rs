use fqa_core::model::{Network, NetworkSpec};
use fqa_tensor::{par, BnMode, RegressionLoss, Sgd, Tape, Tensor};

fn three_steps() -> Vec<u32> {
    let mut net = Network::<f32>::new(NetworkSpec::tinyfqnet(), 4).unwrap();
    let mut sgd = Sgd::new(0.05, 0.9, 1e-4);
    let x = Tensor::from_fn(&[6, 3, 64, 64], |i| ((i * 13 % 89) as f32 / 44.0) - 1.0);
    let y = [0.1, 0.3, 0.5, 0.6, 0.8, 0.9];
    for _ in 0..3 {
        let mut tape = Tape::new();
        let out = net.forward(&mut tape, x.clone(), BnMode::Train).unwrap();
        let loss = tape.regression_loss(out.output, &y, RegressionLoss::Squared).unwrap();
        tape.backward(loss, net.store_mut()).unwrap();
        net.apply_bn_updates(out.bn_updates);
        sgd.step(net.store_mut());
    }
    let mut bits: Vec<u32> = net
        .store()
        .params()
        .iter()
        .flat_map(|p| p.value.data().iter().map(|v| v.to_bits()))
        .collect();
    bits.extend(net.predict_quality(x).unwrap().iter().map(|v| v.to_bits()));
    bits
}

#[test]
fn parallel_and_sequential_training_agree_bitwise() {
    par::set_parallel(false);
    let seq = three_steps();
    par::set_parallel(true);
    let parallel = three_steps();
    assert_eq!(seq, parallel);
}
