use gsrc::codec::{encode, reconstruct, verify_mds, GeneralizedCode, Stripe, VerifyLevel};
use gsrc::layout::CodeParams;
use gsrc::repair::{execute_repair, plan_repair, SymbolRef};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn code(n: usize, k: usize, alpha: usize, w: u8) -> GeneralizedCode {
    let p = CodeParams::new(n, k, alpha, w, 11).unwrap();
    let (code, report) = GeneralizedCode::construct(&p, VerifyLevel::Auto).unwrap();
    assert!(report.passed());
    code
}

#[test]
fn repair_is_exact_on_fuzzed_stripes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (n, k, alpha, w) in [(5, 3, 4, 4), (6, 4, 4, 8), (9, 6, 9, 8), (10, 6, 8, 16), (14, 10, 16, 16)] {
        let c = code(n, k, alpha, w);
        let plans: Vec<_> = (0..k).map(|j| plan_repair(c.layout(), j).unwrap()).collect();
        for _ in 0..100 {
            let s = Stripe::random(c.params(), c.field(), &mut rng);
            let coded = encode(&c, &s).unwrap();
            for plan in &plans {
                let got = execute_repair(&c, plan, |r| {
                    assert_ne!(r.node(k), plan.failed);
                    Some(match r {
                        SymbolRef::Data(id) => coded.node(id.node)[id.row],
                        SymbolRef::Parity { row, parity } => coded.parity(row, parity),
                    })
                })
                .unwrap();
                assert_eq!(got, s.node(plan.failed), "({n},{k},{alpha}) d{}", plan.failed + 1);
            }
        }
    }
}

#[test]
fn encode_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c = code(7, 4, 8, 8);
    let f = c.field();
    for _ in 0..50 {
        let a = Stripe::random(c.params(), f, &mut rng);
        let b = Stripe::random(c.params(), f, &mut rng);
        let x = f.random_nonzero(&mut rng);
        let mix = Stripe::new(a.k, a.alpha, a.data.iter().zip(&b.data).map(|(&u, &v)| f.add(f.mul(x, u), v)).collect())
            .unwrap();
        let (ea, eb, em) = (encode(&c, &a).unwrap(), encode(&c, &b).unwrap(), encode(&c, &mix).unwrap());
        for i in 0..em.data.len() {
            assert_eq!(em.data[i], f.add(f.mul(x, ea.data[i]), eb.data[i]));
        }
        assert_eq!(ea.systematic(), a);
    }
}

#[test]
fn any_k_nodes_reconstruct() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = code(14, 10, 16, 16);
    assert!(verify_mds(&c, VerifyLevel::Sampled(20)).passed());
    let s = Stripe::random(c.params(), c.field(), &mut rng);
    let coded = encode(&c, &s).unwrap();
    let mut nodes: Vec<usize> = (0..14).collect();
    for _ in 0..20 {
        nodes.shuffle(&mut rng);
        let avail: Vec<(usize, &[u16])> = nodes[..10].iter().map(|&j| (j, coded.node(j))).collect();
        assert_eq!(reconstruct(&c, &avail).unwrap(), s);
    }
}
