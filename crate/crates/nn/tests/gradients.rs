use std::time::Instant;

use gazeperc_nn::{finite_difference_check, toy_batch, toy_spec, Graph, InitConfig, Model, Tensor, Variant};

#[test]
fn every_variant_matches_finite_differences() {
    let start = Instant::now();
    for v in Variant::ALL {
        let spec = toy_spec(v);
        let model = Model::with_init(spec.clone(), 7, InitConfig { std: 0.5, zero_head: false }).unwrap();
        let batch = toy_batch(&spec, 2, 2, 3);
        let r = finite_difference_check(&model, &batch, 1e-5).unwrap();
        println!("{v}: {} params, max rel err {:.2e} at {}", r.n_checked, r.max_rel_err, r.worst_param);
        assert!(r.max_rel_err < 1e-6, "{v}: {r:?}");
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn gradients_are_deterministic() {
    let spec = toy_spec(Variant::GazeAoi);
    let model = Model::with_init(spec.clone(), 1, InitConfig { std: 0.3, zero_head: false }).unwrap();
    let batch = toy_batch(&spec, 3, 4, 9);
    assert_eq!(model.loss_and_grads(&batch, 0.0).unwrap(), model.loss_and_grads(&batch, 0.0).unwrap());
}

#[test]
fn elementwise_ops_against_finite_differences() {
    // f(a, b) = sum(gelu(a) * b)
    let a0 = vec![-2.0, -0.3, 0.0, 0.7, 3.1, 1.5];
    let b0 = vec![0.5, -1.0, 2.0, 0.25, -0.75, 1.0];
    let f = |a: &[f64], b: &[f64]| {
        let mut g = Graph::new();
        let av = g.leaf(Tensor::matrix(2, 3, a.to_vec()).unwrap());
        let bv = g.leaf(Tensor::matrix(2, 3, b.to_vec()).unwrap());
        let h = g.gelu(av);
        let m = g.mul(h, bv).unwrap();
        let s = g.sum(m);
        let val = g.value(s).data[0];
        g.backward(s).unwrap();
        (val, g.grad(av).unwrap().to_vec())
    };
    let (_, ga) = f(&a0, &b0);
    for i in 0..6 {
        let mut up = a0.clone();
        up[i] += 1e-6;
        let mut dn = a0.clone();
        dn[i] -= 1e-6;
        let num = (f(&up, &b0).0 - f(&dn, &b0).0) / 2e-6;
        assert!((num - ga[i]).abs() < 1e-8);
    }
}
