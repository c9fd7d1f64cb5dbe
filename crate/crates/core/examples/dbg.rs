use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::time::Instant;
use symcirc::labels::Label;
use symcirc::sim::{run_sparse, Input};
use symcirc::synth::{perm_symmetric_basis, random_partition_symmetric_unitary, synth_partition_symmetric};

fn main() {
    for n in 1..=3usize {
        let t = Instant::now();
        let b = perm_symmetric_basis(n, 0).unwrap();
        println!("basis n={n}: lambda_min {:.4} build {:.1}s", b.min_eigenvalue, t.elapsed().as_secs_f64());
    }
    for shape in [vec![2usize], vec![3], vec![2, 1], vec![2, 2]] {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let u = random_partition_symmetric_unitary(&shape, &mut rng);
        let out = synth_partition_symmetric(&u, &shape, 0, 1e6).unwrap();
        let n: usize = shape.iter().sum();
        let labels: Vec<Label> = (1..=n as i64).map(Label::idx).collect();
        let t1 = Instant::now();
        let bits: HashMap<Label, bool> = labels.iter().map(|l| (l.clone(), false)).collect();
        let _ = run_sparse::<f64>(&out.circuit, &Input::Bits(bits)).unwrap();
        println!(
            "shape {:?}: l1={:.2} gates={} col_sim={:.2}s",
            shape, out.decomposition.l1, out.circuit.gate_count(), t1.elapsed().as_secs_f64()
        );
    }
}
