use candle_core::{DType, Device, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use talkface_models::gradcheck::check_gradients;
use talkface_models::layers::{Conv1d, Conv2d, GruCell, InstanceNorm};
use talkface_models::ParamStore;

fn random(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::from_vec(v, shape, &Device::Cpu).unwrap()
}

fn assert_grads(vars: Vec<Var>, f: impl Fn(&[Var]) -> Tensor, what: &str) {
    let loss = || Ok(f(&vars));
    let report = check_gradients(&vars, loss, 60, 1e-6, 1e-6, 0).unwrap();
    assert!(report.max_relative_error < 1e-5, "{what}: {report:?}");
}

#[test]
fn conv1d_gradients_for_every_stride_fit() {
    for (len, k, s, p) in [(29, 3, 2, 1), (15, 3, 2, 1), (8, 3, 2, 1), (9, 3, 2, 1), (4, 4, 1, 0)] {
        let mut store = ParamStore::new(1, DType::F64);
        let conv = Conv1d::new(&mut store, "c", 3, 4, k, s, p).unwrap();
        let x = Var::from_tensor(&random(&[2, 3, len], 2)).unwrap();
        let out_len = (len + 2 * p - k) / s + 1;
        let proj = random(&[2, 4, out_len], 3);
        let mut vars = store.vars().to_vec();
        vars.push(x);
        assert_grads(
            vars,
            |v| conv.forward(v[2].as_tensor()).unwrap().mul(&proj).unwrap().sum_all().unwrap(),
            &format!("conv1d len {len} k {k} s {s} p {p}"),
        );
    }
}

#[test]
fn conv2d_gradients_for_every_stride_fit() {
    for (size, k, s, p) in [(8, 4, 2, 1), (7, 4, 2, 1), (9, 3, 2, 1), (6, 7, 1, 3)] {
        let mut store = ParamStore::new(4, DType::F64);
        let conv = Conv2d::new(&mut store, "c", 2, 3, k, s, p).unwrap();
        let x = Var::from_tensor(&random(&[1, 2, size, size + 1], 5)).unwrap();
        let out = |n: usize| (n + 2 * p - k) / s + 1;
        let proj = random(&[1, 3, out(size), out(size + 1)], 6);
        let mut vars = store.vars().to_vec();
        vars.push(x);
        assert_grads(
            vars,
            |v| conv.forward(v[2].as_tensor()).unwrap().mul(&proj).unwrap().sum_all().unwrap(),
            &format!("conv2d size {size} k {k} s {s} p {p}"),
        );
    }
}

#[test]
fn instance_norm_and_gru_gradients() {
    let mut store = ParamStore::new(7, DType::F64);
    let norm = InstanceNorm::new(&mut store, "n", 2).unwrap();
    let gru = GruCell::new(&mut store, "g", 3, 4).unwrap();
    let x = Var::from_tensor(&random(&[2, 2, 3, 3], 8)).unwrap();
    let z = Var::from_tensor(&random(&[2, 5, 3], 9)).unwrap();
    let p1 = random(&[2, 2, 3, 3], 10);
    let p2 = random(&[2, 5, 4], 11);
    let mut vars = store.vars().to_vec();
    vars.push(x);
    vars.push(z);
    let n = vars.len();
    assert_grads(
        vars,
        |v| {
            let a = norm.forward(v[n - 2].as_tensor()).unwrap().mul(&p1).unwrap().sum_all().unwrap();
            let b = gru.forward_sequence(v[n - 1].as_tensor()).unwrap().mul(&p2).unwrap().sum_all().unwrap();
            (a + b).unwrap()
        },
        "instance norm + gru",
    );
}
